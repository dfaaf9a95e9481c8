"""
Команда sweep: CSV по сетке пар ошибок или по параметру kappa изотропного семейства.

Ячейки считаются пулом потоков, строки пишутся в порядке сетки.
"""
import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

from tqdm import tqdm

from src import config
from src.handlers import CommandResult
from src.managers import bounds, measures
from src.managers.resource_sets import FreeSetRegistry, isotropic, isotropic_family
from src.utils.report_formatter import ReportFormatter
from src.utils.state_io import Report

logger = logging.getLogger(__name__)

BOUNDS_COLUMNS = ["eps1", "eps2", "log_f", "log_thm5", "region"]
ISOTROPIC_COLUMNS = ["kappa", "dmin", "dmax", "ds", "dh_eps",
                     "delta_dmin", "delta_dmax", "delta_ds", "delta_dh_eps"]
FAMILY_RATES = {"strange": 1.0, "norrell": math.log2(1.5)}


def parse_step(text: str) -> float:
    try:
        step = float(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Шаг должен быть числом: {text!r}") from e
    if not 0.0 < step <= 0.5:
        raise argparse.ArgumentTypeError(f"Шаг должен лежать в (0, 0.5]: {step}")
    return step


def kappa_grid(step: float) -> List[float]:
    count = int(math.floor(1.0 / step + 1e-9))
    return [round(i * step, 12) for i in range(count + 1)]


class SweepHandlers:
    """
    Обработчики команды sweep
    """

    def __init__(self, registry: Optional[FreeSetRegistry] = None, workers: Optional[int] = None):
        self.registry = registry or FreeSetRegistry()
        self.workers = workers

    def register(self, subparsers) -> None:
        sweep = subparsers.add_parser("sweep", help="CSV по сетке параметров")
        sweep.add_argument("kind", choices=("bounds", "isotropic"))
        sweep.add_argument("--step", type=parse_step, default=0.01)
        sweep.add_argument("--out", required=True)
        sweep.add_argument("--family", choices=tuple(FAMILY_RATES), default="strange")
        sweep.add_argument("--eps", type=float, default=0.1)
        sweep.set_defaults(handler=self.cmd_sweep)

    def _map_ordered(self, func, items: List[Any], desc: str, progress: bool) -> List[Dict[str, Any]]:
        """executor.map сохраняет порядок входа независимо от порядка вычисления"""
        workers = self.workers or config.SWEEP_WORKERS
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sweep_") as executor:
            return list(tqdm(executor.map(func, items), total=len(items), desc=desc,
                             disable=not progress, file=sys.stderr))

    # ========== ЯЧЕЙКИ ==========

    @staticmethod
    def bounds_row(e: bounds.ErrorPair) -> Dict[str, Any]:
        report = bounds.compare_bounds(e)
        return {
            "eps1": e.eps1,
            "eps2": e.eps2,
            "log_f": report.log_f,
            "log_thm5": report.log_inv_1m_eps_prime,
            "region": report.region.value,
        }

    def isotropic_row(self, kappa: float, family: str, eps: float) -> Dict[str, Any]:
        free = self.registry.get("stab3", (3,))
        phi, sigma = isotropic_family(family)
        state = isotropic(phi, sigma, kappa)
        r = FAMILY_RATES[family]
        exact = bounds.isotropic_exact(r, kappa)
        smooth = bounds.closed_form_smoothed(r, kappa, eps)
        row = {
            "kappa": kappa,
            "dmin": measures.d_min(state, free).bits,
            "dmax": measures.d_max(state, free).bits,
            "ds": measures.d_s(state, free).bits,
            "dh_eps": measures.d_h(state, free, eps).bits,
        }
        row["delta_dmin"] = row["dmin"] - exact.d_min
        row["delta_dmax"] = row["dmax"] - exact.d_max
        row["delta_ds"] = row["ds"] - exact.d_s
        row["delta_dh_eps"] = row["dh_eps"] - smooth.d_h
        return row

    # ========== КОМАНДА ==========

    def cmd_sweep(self, args: argparse.Namespace) -> CommandResult:
        out = Path(args.out)
        if not out.parent.is_dir():
            raise FileNotFoundError(f"Каталог для {out} не существует")
        progress = getattr(args, "progress", False)
        inputs: Dict[str, Any] = {"kind": args.kind, "step": args.step, "out": str(out)}

        if args.kind == "bounds":
            grid = list(bounds.bound_grid(args.step))
            rows = self._map_ordered(self.bounds_row, grid, "bounds", progress)
            columns = BOUNDS_COLUMNS
            diagnostics: Dict[str, Any] = {}
        else:
            inputs.update({"family": args.family, "eps": args.eps})
            kappas = kappa_grid(args.step)
            # кэш множеств не потокобезопасен: заполняем до запуска пула
            self.registry.get("stab3", (3,))
            rows = self._map_ordered(lambda k: self.isotropic_row(k, args.family, args.eps),
                                     kappas, "isotropic", progress)
            columns = ISOTROPIC_COLUMNS
            deltas = [abs(row[c]) for row in rows for c in columns if c.startswith("delta_")
                      and math.isfinite(row[c])]
            diagnostics = {"max_delta": max(deltas, default=0.0)}
            if diagnostics["max_delta"] > 1e-4:
                logger.warning(f"⚠️ Отклонение от замкнутых формул {diagnostics['max_delta']:.3e} > 1e-4")

        written = ReportFormatter.write_csv(rows, columns, out)
        diagnostics["rows"] = written
        logger.info(f"✅ sweep {args.kind}: {written} строк -> {out}")
        report = Report(command="sweep", inputs=inputs, results=[{"rows": written, "out": str(out)}],
                        diagnostics=diagnostics)
        return CommandResult(exit_code=0, report=report, lines=[f"{written} {out}"])
