"""
Команды measure и export.

measure считает одну меру для состояния каталога или файла и печатает
значение в битах с 9 знаками. export выгружает состояние, вершины
свободного множества или ансамбль каталога в JSON.
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from src.errors import DimensionMismatch, InputError, UnknownLabel
from src.handlers import CommandResult
from src.managers import measures, twirl
from src.managers.resource_sets import SET_KINDS, FreeSet, FreeSetRegistry, named_state
from src.utils.linalg import DensityMatrix
from src.utils.report_formatter import ReportFormatter
from src.utils.state_io import Report, StateFile, encode_matrix, load_state, save_state

logger = logging.getLogger(__name__)

# ========== КОНСТАНТЫ ==========

MEASURES = ("dmin", "dmax", "ds", "dh", "dmin_aff", "dh_aff", "dmax_eps", "ds_eps",
            "weight", "stabnorm", "rtr", "gfid")
MEASURE_ALIASES = {"dmins_aff": "dmin_aff"}
SMOOTHED = {"dh", "dh_aff", "dmax_eps", "ds_eps"}

ENSEMBLES: Dict[str, Callable[[], twirl.UnitaryEnsemble]] = {
    "face": twirl.face_ensemble,
    "sl2z3": twirl.sl2z3_ensemble,
    "hoggar": lambda: twirl.hoggar_closure().as_ensemble((2, 2, 2)),
    "magic_t_qubit": lambda: twirl.clifford_magic_dephasing("t_qubit"),
    "magic_t_qutrit": lambda: twirl.clifford_magic_dephasing("t_qutrit"),
    "magic_toffoli": lambda: twirl.clifford_magic_dephasing("toffoli"),
}


def resolve_state(spec: str) -> DensityMatrix:
    """Путь к JSON-файлу состояния или метка каталога"""
    path = Path(spec)
    if path.suffix.lower() == ".json" or path.is_file():
        return load_state(path)
    return named_state(spec)


def parse_dims(text: str):
    try:
        dims = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"dims должны быть списком целых через запятую: {text!r}") from e
    if not dims or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"Некорректные dims: {text!r}")
    return dims


class MeasureHandlers:
    """
    Обработчики команд measure и export
    """

    def __init__(self, registry: Optional[FreeSetRegistry] = None):
        self.registry = registry or FreeSetRegistry()

    def register(self, subparsers) -> None:
        """Регистрация подкоманд"""
        measure = subparsers.add_parser("measure", help="Значение меры ресурса в битах")
        measure.add_argument("--state", required=True, help="Метка каталога или путь к JSON")
        measure.add_argument("--set", dest="set_kind", choices=SET_KINDS, default="stab")
        measure.add_argument("--measure", required=True, choices=MEASURES + tuple(MEASURE_ALIASES))
        measure.add_argument("--eps", type=float, default=0.0)
        measure.add_argument("--k", type=float, default=2.0)
        measure.add_argument("--witness", action="store_true", help="Добавить свидетелей в отчёт")
        measure.set_defaults(handler=self.cmd_measure)

        export = subparsers.add_parser("export", help="Выгрузка состояния, множества или ансамбля в JSON")
        export.add_argument("what", choices=("state", "set", "ensemble"))
        export.add_argument("name", help="Метка состояния, вид множества или имя ансамбля")
        export.add_argument("--dims", type=parse_dims, default=(2,))
        export.add_argument("--out", required=True)
        export.set_defaults(handler=self.cmd_export)

    # ========== MEASURE ==========

    def _free_set(self, kind: str, state: DensityMatrix) -> FreeSet:
        return self.registry.get(kind, state.dims)

    def cmd_measure(self, args: argparse.Namespace) -> CommandResult:
        name = MEASURE_ALIASES.get(args.measure, args.measure)
        state = resolve_state(args.state)
        inputs = {"state": args.state, "set": args.set_kind, "measure": name, "dims": list(state.dims)}
        if name in SMOOTHED:
            inputs["eps"] = args.eps
        if name == "gfid":
            inputs["k"] = args.k
        logger.info(f"measure: {name} для {args.state} на {args.set_kind}")

        result: Dict[str, Any] = {"measure": name}
        if name == "stabnorm":
            if any(d != 2 for d in state.dims):
                raise DimensionMismatch(f"stabnorm определён только для кубитов, получено {state.dims}")
            result["value"] = measures.stab_norm(state.matrix, len(state.dims))
        else:
            free = self._free_set(args.set_kind, state)
            result.update(self._evaluate(name, state, free, args))
            if not args.witness:
                result.pop("witness_operator", None)
                result.pop("witness_state", None)

        diagnostics = {key: result.pop(key) for key in ("dual_gap", "iterations") if key in result}
        report = Report(command="measure", inputs=inputs, results=[result], diagnostics=diagnostics)
        return CommandResult(exit_code=0, report=report, lines=[ReportFormatter.format_bits(result["value"])])

    @staticmethod
    def _evaluate(name: str, state: DensityMatrix, free: FreeSet, args: argparse.Namespace) -> Dict[str, Any]:
        if name == "weight":
            return {"value": measures.weight(state, free)}
        if name == "rtr":
            return {"value": measures.r_tr(state, free)}
        if name == "gfid":
            pair = measures.g_fidelity(state, free, args.k)
            return {"value": pair.primal, "dual": pair.dual, "gap": pair.gap}

        dispatch = {
            "dmin": lambda: measures.d_min(state, free),
            "dmax": lambda: measures.d_max(state, free),
            "ds": lambda: measures.d_s(state, free),
            "dh": lambda: measures.d_h(state, free, args.eps),
            "dmin_aff": lambda: measures.d_min_aff(state, free),
            "dh_aff": lambda: measures.d_h_aff(state, free, args.eps),
            "dmax_eps": lambda: measures.d_max_smooth(state, free, args.eps),
            "ds_eps": lambda: measures.d_s_smooth(state, free, args.eps),
        }
        value = dispatch[name]()
        out: Dict[str, Any] = {
            "value": value.bits,
            "status": value.status.value,
            "dual_gap": value.dual_gap,
            "iterations": value.iterations,
        }
        if value.witness_operator is not None:
            out["witness_operator"] = encode_matrix(value.witness_operator)
        if value.witness_state is not None:
            out["witness_state"] = StateFile.from_density(value.witness_state).model_dump()
        return out

    # ========== EXPORT ==========

    def cmd_export(self, args: argparse.Namespace) -> CommandResult:
        out = Path(args.out)
        inputs = {"what": args.what, "name": args.name, "out": str(out)}
        if args.what == "state":
            state = named_state(args.name)
            save_state(state, out)
            summary = {"dims": list(state.dims)}
        elif args.what == "set":
            free = self.registry.get(args.name, args.dims)
            if not free.is_hull:
                raise InputError(f"Множество {free.label} задано конусом, вершин для выгрузки нет")
            payload = [StateFile.from_density(free.vertex(k)).model_dump() for k in range(free.vertex_count)]
            out.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            inputs["dims"] = list(args.dims)
            summary = {"vertices": free.vertex_count}
        else:
            if args.name not in ENSEMBLES:
                raise UnknownLabel(f"Неизвестный ансамбль {args.name!r}; доступны {sorted(ENSEMBLES)}")
            ensemble = ENSEMBLES[args.name]()
            twirl.export_ensemble(ensemble, out)
            summary = {"unitaries": len(ensemble)}
        logger.info(f"✅ export {args.what} {args.name} -> {out}")
        report = Report(command="export", inputs=inputs, results=[summary])
        return CommandResult(exit_code=0, report=report, lines=[str(out)])
