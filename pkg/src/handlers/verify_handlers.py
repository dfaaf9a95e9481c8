"""
Команда verify: наборы проверок props, bounds, isotropic, twirl.

Каждая проверка возвращает строки CheckRow с ожидаемым и наблюдаемым
значением и допуском. Код выхода 1, если провалена хотя бы одна строка.
"""
import argparse
import logging
import math
import sys
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src import config
from src.errors import ResourceError
from src.handlers import CommandResult
from src.managers import bounds, measures, twirl
from src.managers.resource_sets import (
    FreeSet,
    FreeSetRegistry,
    isotropic,
    isotropic_family,
    named_pure_state,
    named_state,
    vertex_cone,
)
from src.services.bisection import bisection_solve, generalized_eigen_problem
from src.services.convex import LinearProgram, SolutionStatus, solve_lp, solve_sdp
from src.services.simplex import simplex_solve
from src.utils.linalg import DensityMatrix, pauli_group, random_density_matrix, trace_distance
from src.utils.report_formatter import ReportFormatter
from src.utils.state_io import CheckRow, Report

logger = logging.getLogger(__name__)

# ========== КОНСТАНТЫ ==========

SUITES = ("props", "bounds", "isotropic", "twirl")
ORDERING_STATES = 200
MONOTONE_STATES = 20
LP_INSTANCES = 100
SDP_INSTANCES = 40
CONE_STATES = 5
TWIRL_INPUTS = 50
KAPPA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
EPS_GRID = (0.0, 0.05, 0.1, 0.2, 0.4)
ERROR_PAIRS = ((0.0, 0.0), (0.1, 0.1), (0.05, 0.2))
LOG_12_5 = math.log2(12.0 / 5.0)
LOG_3_2 = math.log2(1.5)

Check = Callable[[], List[CheckRow]]


def close_row(suite: str, name: str, expected: float, observed: float, tol: float, detail: str = "") -> CheckRow:
    ok = math.isclose(observed, expected, rel_tol=0.0, abs_tol=tol) or observed == expected
    return CheckRow(suite=suite, name=name, expected=expected, observed=observed,
                    tolerance=tol, passed=bool(ok), detail=detail)


def bound_row(suite: str, name: str, observed: float, limit: float, tol: float,
              upper: bool = True, detail: str = "") -> CheckRow:
    """observed <= limit + tol (upper) или observed >= limit - tol"""
    ok = observed <= limit + tol if upper else observed >= limit - tol
    return CheckRow(suite=suite, name=name, expected=limit, observed=observed,
                    tolerance=tol, passed=bool(ok), detail=detail)


def flag_row(suite: str, name: str, ok: bool, detail: str = "") -> CheckRow:
    return CheckRow(suite=suite, name=name, passed=bool(ok), detail=detail)


class VerifyHandlers:
    """
    Обработчики команды verify
    """

    def __init__(self, registry: Optional[FreeSetRegistry] = None,
                 ordering_states: int = ORDERING_STATES,
                 lp_instances: int = LP_INSTANCES):
        self.registry = registry or FreeSetRegistry()
        self.ordering_states = ordering_states
        self.lp_instances = lp_instances
        self._suites: Dict[str, Callable[[], List[Tuple[str, Check]]]] = {
            "props": self._props_checks,
            "bounds": self._bounds_checks,
            "isotropic": self._isotropic_checks,
            "twirl": self._twirl_checks,
        }

    def register(self, subparsers) -> None:
        verify = subparsers.add_parser("verify", help="Наборы проверок с таблицей PASS/FAIL")
        verify.add_argument("suite", choices=SUITES + ("all",))
        verify.set_defaults(handler=self.cmd_verify)

    def _set(self, kind: str, *dims: int) -> FreeSet:
        return self.registry.get(kind, dims)

    def _rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng(config.RANDOM_SEED + offset)

    # ========== ЗАПУСК ==========

    def run_suite(self, suite: str, progress: bool = False) -> List[CheckRow]:
        checks = self._suites[suite]()
        rows: List[CheckRow] = []
        for name, check in tqdm(checks, desc=suite, disable=not progress, file=sys.stderr):
            try:
                rows.extend(check())
            except ResourceError as e:
                logger.error(f"❌ Проверка {suite}/{name} упала: {e}")
                rows.append(flag_row(suite, name, False, detail=f"{type(e).__name__}: {e}"))
        return rows

    def cmd_verify(self, args: argparse.Namespace) -> CommandResult:
        suites = SUITES if args.suite == "all" else (args.suite,)
        rows: List[CheckRow] = []
        for suite in suites:
            logger.info(f"🚀 Набор проверок {suite}")
            rows.extend(self.run_suite(suite, progress=getattr(args, "progress", False)))
        failed = [row for row in rows if not row.passed]
        for row in failed:
            logger.warning(f"⚠️ FAIL {row.suite}/{row.name}: {row.detail or row.observed}")
        report = Report(
            command="verify",
            inputs={"suite": args.suite, "seed": config.RANDOM_SEED},
            results=[row.model_dump() for row in rows],
            diagnostics={"checks": len(rows), "failed": len(failed)},
        )
        lines = [ReportFormatter.checks_table(rows), ReportFormatter.checks_summary(rows)]
        return CommandResult(exit_code=1 if failed else 0, report=report, lines=lines)

    # ========== PROPS ==========

    def _props_checks(self) -> List[Tuple[str, Check]]:
        return [
            ("strange", self._check_strange),
            ("strange^2", self._check_strange_two_copies),
            ("hoggar", self._check_hoggar),
            ("norrell", self._check_norrell),
            ("face", self._check_face),
            ("weight", self._check_weight),
            ("coherence", self._check_coherence),
            ("ppt", self._check_bell),
            ("r_tr", self._check_trace_distance),
            ("g_fidelity", self._check_g_fidelity),
            ("ordering", self._check_ordering_chain),
            ("eps_monotone", self._check_eps_monotone),
            ("vertex_null", self._check_vertex_nullity),
            ("lp_oracle", self._check_lp_oracle),
            ("vertex_cone", self._check_vertex_cone),
            ("sdp_oracle", self._check_sdp_oracle),
        ]

    def _collapse_rows(self, label: str, free: FreeSet, expected: float, tol: float,
                       with_ds: bool = True) -> List[CheckRow]:
        state = named_state(label)
        rows = [
            close_row("props", f"{label}: d_min", expected, measures.d_min(state, free).bits, tol),
            close_row("props", f"{label}: d_max", expected, measures.d_max(state, free).bits, tol),
        ]
        if with_ds:
            rows.append(close_row("props", f"{label}: d_s", expected, measures.d_s(state, free).bits, tol))
        return rows

    def _check_strange(self) -> List[CheckRow]:
        return self._collapse_rows("strange", self._set("stab3", 3), 1.0, 1e-6)

    def _check_strange_two_copies(self) -> List[CheckRow]:
        return self._collapse_rows("strange^2", self._set("stab3", 3, 3), 2.0, 1e-5, with_ds=False)

    def _check_hoggar(self) -> List[CheckRow]:
        free = self._set("stab", 2, 2, 2)
        rows = self._collapse_rows("hoggar", free, LOG_12_5, 1e-5)
        hog = named_state("hoggar").matrix
        overlaps = np.abs(np.einsum("kij,ji->k", pauli_group(3)[1:], hog))
        rows.append(close_row("props", "hoggar: |<P>| = 1/3", 1.0 / 3.0,
                              float(overlaps[np.argmax(np.abs(overlaps - 1.0 / 3.0))]), 1e-10))
        rows.append(close_row("props", "hoggar: stab_norm", 2.75, measures.stab_norm(hog, 3), 1e-10))
        relaxed = measures.d_min_stabnorm_relaxation(hog, 3)
        rows.append(close_row("props", "hoggar: d_min stab-norm", LOG_12_5, relaxed.bits, 1e-5))
        return rows

    def _check_norrell(self) -> List[CheckRow]:
        return self._collapse_rows("norrell", self._set("stab3", 3), LOG_3_2, 1e-6)

    def _check_face(self) -> List[CheckRow]:
        one = self._set("stab", 2)
        face = named_state("face")
        low, high = measures.d_min(face, one).bits, measures.d_max(face, one).bits
        standard = measures.d_s(face, one).bits
        pair = named_state("face^2")
        two = self._set("stab", 2, 2)
        return [
            close_row("props", "face: d_min = d_max", high, low, 1e-6),
            bound_row("props", "face: d_s - d_max", standard - high, 1e-3, 0.0, upper=False),
            close_row("props", "face^2: d_min = d_max",
                      measures.d_max(pair, two).bits, measures.d_min(pair, two).bits, 1e-6),
        ]

    def _check_weight(self) -> List[CheckRow]:
        free = self._set("stab3", 3)
        return [
            bound_row("props", "weight((I-T)/2)", measures.weight(named_state("t_qutrit_perp"), free), 0.0, 1e-6),
            bound_row("props", "weight((I-S)/2)", measures.weight(named_state("strange_perp"), free),
                      1.0, 1e-6, upper=False),
        ]

    def _check_coherence(self) -> List[CheckRow]:
        rows = []
        for m in (2, 3, 4):
            label = f"max_coherent({m})"
            state, free = named_state(label), self._set("coh", m)
            expected = math.log2(m)
            rows.append(close_row("props", f"{label}: d_min", expected, measures.d_min(state, free).bits, 1e-6))
            rows.append(close_row("props", f"{label}: d_max", expected, measures.d_max(state, free).bits, 1e-6))
            rows.append(close_row("props", f"{label}: d_min_aff", expected,
                                  measures.d_min_aff(state, free).bits, 1e-6))
        return rows

    def _check_bell(self) -> List[CheckRow]:
        return self._collapse_rows("bell(2)", self._set("ppt", 2, 2), 1.0, 1e-6)

    def _check_trace_distance(self) -> List[CheckRow]:
        free = self._set("stab3", 3)
        return [
            close_row("props", "r_tr(strange)", 0.5, measures.r_tr(named_state("strange"), free), 1e-6),
            close_row("props", "r_tr(norrell)", 1.0 / 3.0, measures.r_tr(named_state("norrell"), free), 1e-6),
        ]

    def _check_g_fidelity(self) -> List[CheckRow]:
        rows = []
        cases = [("strange", self._set("stab3", 3), 2.0),
                 ("face", self._set("stab", 2), 1.5),
                 ("face", self._set("stab", 2), math.sqrt(3.0)),
                 ("zero", self._set("stab", 2), 4.0)]
        for label, free, k in cases:
            pair = measures.g_fidelity(named_state(label), free, k)
            rows.append(close_row("props", f"G({label}; {k:.4f}) primal = dual", pair.dual, pair.primal, 1e-6))
            if label == "zero":
                rows.append(close_row("props", f"G(free; {k:g}) = 1/K", 1.0 / k, pair.primal, 1e-8))
        return rows

    def _check_ordering_chain(self) -> List[CheckRow]:
        """d_min_aff <= d_min <= d_max <= d_s на случайных состояниях"""
        rows = []
        for offset, (kind, dims) in enumerate((("stab", (2,)), ("stab3", (3,)), ("coh", (2,)))):
            free = self._set(kind, *dims)
            rng = self._rng(offset)
            worst = 0.0
            for i in range(self.ordering_states):
                rho = DensityMatrix(random_density_matrix(free.dim, rng, rank=1 if i % 2 else None), free.dims)
                chain = [measures.d_min_aff(rho, free).bits, measures.d_min(rho, free).bits,
                         measures.d_max(rho, free).bits, measures.d_s(rho, free).bits]
                finite = [v for v in chain if math.isfinite(v)]
                worst = max([worst] + [a - b for a, b in zip(finite, finite[1:])])
            rows.append(bound_row("props", f"ordering {free.label} x{self.ordering_states}", worst, 0.0, 1e-6))
        return rows

    def _check_eps_monotone(self) -> List[CheckRow]:
        free = self._set("stab", 2)
        rng = self._rng(10)
        worst_h = worst_max = 0.0
        for _ in range(MONOTONE_STATES):
            rho = DensityMatrix(random_density_matrix(2, rng, rank=1), (2,))
            hyp = [measures.d_h(rho, free, e).bits for e in (0.0, 0.1, 0.2)]
            smooth = [measures.d_max_smooth(rho, free, e).bits for e in (0.0, 0.1, 0.2)]
            worst_h = max([worst_h] + [a - b for a, b in zip(hyp, hyp[1:])])
            worst_max = max([worst_max] + [b - a for a, b in zip(smooth, smooth[1:])])
        return [
            bound_row("props", "d_h не убывает по eps", worst_h, 0.0, 1e-6),
            bound_row("props", "d_max^eps не возрастает по eps", worst_max, 0.0, 1e-6),
        ]

    def _check_vertex_nullity(self) -> List[CheckRow]:
        rows = []
        for kind, dims in (("stab", (2,)), ("stab3", (3,))):
            free = self._set(kind, *dims)
            worst = 0.0
            for k in range(free.vertex_count):
                vertex = free.vertex(k)
                worst = max(worst, measures.d_min(vertex, free).bits, measures.d_max(vertex, free).bits,
                            measures.d_s(vertex, free).bits)
            rows.append(bound_row("props", f"вершины {free.label}: меры = 0", worst, 0.0, 1e-6))
        return rows

    def _check_lp_oracle(self) -> List[CheckRow]:
        """Внутренняя точка против симплекса на случайных совместных ограниченных LP"""
        rng = self._rng(20)
        worst = 0.0
        mismatched = 0
        for i in range(self.lp_instances):
            m, n = 3 + i % 3, 8
            a = rng.standard_normal((m, n))
            b = a @ rng.uniform(0.1, 1.0, n)
            c = rng.uniform(0.1, 1.0, n)
            ipm = solve_lp(LinearProgram(objective=c, eq_matrix=a, eq_rhs=b, label=f"oracle_{i}"))
            oracle = simplex_solve(c, a, b)
            if ipm.status is not SolutionStatus.OPTIMAL or oracle.status != "optimal":
                mismatched += 1
                continue
            worst = max(worst, abs(ipm.value - oracle.value))
        return [
            flag_row("props", f"LP статусы x{self.lp_instances}", mismatched == 0, detail=f"расхождений {mismatched}"),
            bound_row("props", "LP: |ipm - simplex|", worst, 0.0, 1e-7),
        ]

    def _check_vertex_cone(self) -> List[CheckRow]:
        """d_max на оболочке stab(2,2) и на той же оболочке, записанной конусом"""
        free = self._set("stab", 2, 2)
        cone = vertex_cone(free)
        rng = self._rng(50)
        states = [named_state("face^2"), named_state("t_qubit^2")]
        states += [DensityMatrix(random_density_matrix(free.dim, rng), free.dims) for _ in range(CONE_STATES)]
        worst = max(abs(measures.d_max(rho, free).bits - measures.d_max(rho, cone).bits) for rho in states)
        return [bound_row("props", f"d_max stab(2,2): оболочка = конус x{len(states)}", worst, 0.0, 1e-5)]

    def _check_sdp_oracle(self) -> List[CheckRow]:
        """Внутренняя точка против бисекции на задачах обобщённого собственного значения"""
        rng = self._rng(40)
        worst = 0.0
        mismatched = 0
        for i in range(SDP_INSTANCES):
            problem = generalized_eigen_problem(rng, blocks=1 + i % 20, dim=1 + i % 6, label=f"sdp_oracle_{i}")
            ipm = solve_sdp(problem)
            oracle = bisection_solve(problem)
            if ipm.status is not SolutionStatus.OPTIMAL or oracle.status != "optimal":
                mismatched += 1
                continue
            worst = max(worst, abs(ipm.value - oracle.value))
        return [
            flag_row("props", f"SDP статусы x{SDP_INSTANCES}", mismatched == 0, detail=f"расхождений {mismatched}"),
            bound_row("props", "SDP: |ipm - bisection|", worst, 0.0, 1e-5),
        ]

    # ========== BOUNDS ==========

    def _bounds_checks(self) -> List[Tuple[str, Check]]:
        return [
            ("f(0,0)", lambda: [close_row("bounds", "f(0, 0) = 1", 1.0,
                                          bounds.f_bound(bounds.ErrorPair(0.0, 0.0)), 0.0)]),
            ("crossing", self._check_crossing),
            ("ordering", self._check_bound_ordering),
            ("yield_cost", self._check_yield_cost),
        ]

    @staticmethod
    def _check_crossing() -> List[CheckRow]:
        """Отрезок пересечения против прямого сравнения ветвей на сетке 0.005"""
        disagreements = 0
        checked = 0
        for e in bounds.bound_grid(0.005):
            if not e.sqrt_region:
                continue
            first = 1.0 / (1.0 - e.eps1 - math.sqrt(e.eps2))
            second_gap = math.sqrt(1.0 - e.eps2) - math.sqrt(e.eps1)
            second = second_gap ** -2 if second_gap > 0 else math.inf
            if math.isfinite(second) and abs(first - second) <= 1e-9 * max(first, second):
                continue
            lo, hi = bounds.crossing_interval(e.eps2)
            checked += 1
            if (lo <= e.eps1 <= hi) != bounds.first_branch_preferred(e):
                disagreements += 1
        return [close_row("bounds", f"crossing_interval на {checked} узлах", 0.0, float(disagreements), 0.0)]

    @staticmethod
    def _check_bound_ordering() -> List[CheckRow]:
        violations = 0
        worst_f = worst_linear = math.inf
        count = 0
        for e in bounds.bound_grid(0.01):
            count += 1
            try:
                bounds.compare_bounds(e)
            except AssertionError:
                violations += 1
            worst_f = min(worst_f, bounds.sqrt_branch_slack(e))
            if e.sqrt_region:
                worst_linear = min(worst_linear, bounds.linear_branch_slack(e))
        return [
            close_row("bounds", f"log 1/(1-eps') <= log f на {count} узлах", 0.0, float(violations), 0.0),
            bound_row("bounds", "1 - eps' >= (sqrt(1-eps2) - sqrt(eps1))^2", worst_f, 0.0, 1e-12, upper=False),
            bound_row("bounds", "1 - eps' >= 1 - eps1 - sqrt(eps2)", worst_linear, 0.0, 1e-12, upper=False),
        ]

    def _check_yield_cost(self) -> List[CheckRow]:
        rows = []
        ladder = measures.ReferenceLadder.multiples(0.01, 300, label="0.01")
        for label, kind, dims in (("strange", "stab3", (3,)), ("face", "stab", (2,)), ("norrell", "stab3", (3,))):
            free = self._set(kind, *dims)
            rho = named_state(label)
            for eps1, eps2 in ERROR_PAIRS:
                check = bounds.yield_cost_check(rho, free, ladder, bounds.ErrorPair(eps1, eps2))
                detail = f"d={check.yield_bits:.6f} c={check.cost_bits:.6f}"
                rows.append(flag_row("bounds", f"{label} d <= c + log f ({eps1}, {eps2})", check.linear_ok, detail))
                rows.append(flag_row("bounds", f"{label} d <= c + log 1/(1-eps') ({eps1}, {eps2})",
                                     check.prime_ok, detail))
        return rows

    # ========== ISOTROPIC ==========

    def _isotropic_checks(self) -> List[Tuple[str, Check]]:
        return [
            ("strange kappa", lambda: self._check_family("strange", 1.0, KAPPA_GRID)),
            ("norrell kappa", lambda: self._check_family("norrell", LOG_3_2, (0.0, 0.5, 1.0))),
            ("strange smoothed", self._check_smoothed),
            ("strange d_h kappa", self._check_hypothesis_kappa),
        ]

    def _check_family(self, label: str, r: float, kappas) -> List[CheckRow]:
        free = self._set("stab3", 3)
        phi, sigma = isotropic_family(label)
        rows = []
        for kappa in kappas:
            state = isotropic(phi, sigma, kappa)
            exact = bounds.isotropic_exact(r, kappa)
            name = f"{label} kappa={kappa}"
            rows.append(close_row("isotropic", f"{name}: d_min", exact.d_min, measures.d_min(state, free).bits, 1e-4))
            rows.append(close_row("isotropic", f"{name}: d_max", exact.d_max, measures.d_max(state, free).bits, 1e-4))
            rows.append(close_row("isotropic", f"{name}: d_s", exact.d_s, measures.d_s(state, free).bits, 1e-4))
        return rows

    def _check_smoothed(self) -> List[CheckRow]:
        free = self._set("stab3", 3)
        state = named_state("strange")
        rows = []
        for eps in EPS_GRID:
            forms = bounds.closed_form_smoothed(1.0, 1.0, eps)
            rows.append(close_row("isotropic", f"strange eps={eps}: d_h", forms.d_h,
                                  measures.d_h(state, free, eps).bits, 1e-4))
            rows.append(close_row("isotropic", f"strange eps={eps}: d_max^eps", forms.d_max_smooth,
                                  measures.d_max_smooth(state, free, eps).bits, 1e-4))
            rows.append(close_row("isotropic", f"strange eps={eps}: d_s^eps", forms.d_s_smooth,
                                  measures.d_s_smooth(state, free, eps).bits, 1e-4))
        return rows

    def _check_hypothesis_kappa(self, eps: float = 0.1) -> List[CheckRow]:
        free = self._set("stab3", 3)
        phi, sigma = isotropic_family("strange")
        rows = []
        for kappa in KAPPA_GRID:
            forms = bounds.closed_form_smoothed(1.0, kappa, eps)
            observed = measures.d_h(isotropic(phi, sigma, kappa), free, eps).bits
            rows.append(close_row("isotropic", f"strange kappa={kappa}: d_h^{eps}", forms.d_h, observed, 1e-4))
        return rows

    # ========== TWIRL ==========

    def _twirl_checks(self) -> List[Tuple[str, Check]]:
        return [
            ("measure-prepare strange", self._check_measure_prepare),
            ("sl2z3", self._check_sl2z3),
            ("hoggar group", self._check_hoggar_group),
            ("verify_free", self._check_freeness),
            ("clifford magic", self._check_clifford_magic),
        ]

    def _check_measure_prepare(self) -> List[CheckRow]:
        """Канал из решения мер против явного отображения для Strange"""
        free = self._set("stab3", 3)
        channel = twirl.build_lemma3_channel(named_state("strange"), free)
        reference = twirl.measure_prepare_map("strange")
        symmetrized = twirl.channel_compose(channel, twirl.sl2z3_ensemble())
        rng = self._rng(30)
        raw = twirled = idempotence = 0.0
        for _ in range(TWIRL_INPUTS):
            rho = random_density_matrix(3, rng)
            expected = reference(rho)
            raw = max(raw, trace_distance(channel(rho), expected))
            twirled = max(twirled, trace_distance(symmetrized(rho), expected))
            idempotence = max(idempotence, trace_distance(reference(expected), expected))
        return [
            bound_row("twirl", f"канал из решения = явное отображение x{TWIRL_INPUTS}", raw, 0.0, 1e-9),
            bound_row("twirl", "канал из решения после SL(2,Z3) = явное отображение", twirled, 0.0, 1e-9),
            bound_row("twirl", "явное отображение идемпотентно", idempotence, 0.0, 1e-12),
        ]

    @staticmethod
    def _check_sl2z3() -> List[CheckRow]:
        ensemble = twirl.sl2z3_ensemble()
        s = named_state("strange").matrix
        target = (3.0 * np.eye(3) - s) / 8.0
        worst = max(trace_distance(ensemble(psi), target) for psi in twirl.strange_sic_projectors()[1:])
        stab = trace_distance(ensemble(s), s)
        return [
            close_row("twirl", "SL(2,Z3): порядок 24", 24.0, float(len(ensemble)), 0.0),
            bound_row("twirl", "SL(2,Z3) twirl psi_k = (3I - S)/8", worst, 0.0, 1e-9),
            bound_row("twirl", "SL(2,Z3) стабилизирует S", stab, 0.0, 1e-9),
        ]

    @staticmethod
    def _check_hoggar_group() -> List[CheckRow]:
        closure = twirl.hoggar_closure()
        hog = named_pure_state("hoggar")
        vec = hog.amplitudes
        drift = max(1.0 - abs(np.vdot(vec, u @ vec)) for u in closure.elements)
        return [
            flag_row("twirl", f"Hoggar: замыкание без обрезки ({closure.order} элементов)", not closure.capped),
            bound_row("twirl", "Hoggar: группа стабилизирует |Hog>", drift, 0.0, 1e-9),
            flag_row("twirl", "Hoggar: |Hog> - единственный общий собственный вектор",
                     twirl.eigenvector_uniqueness(closure, hog)),
        ]

    def _check_freeness(self) -> List[CheckRow]:
        qubit, qutrit = self._set("stab", 2), self._set("stab3", 3)
        hog_gens = twirl.UnitaryEnsemble.uniform(list(twirl.hoggar_generators().values()), (2, 2, 2))
        t_gate = np.diag([np.exp(2j * np.pi / 9), 1.0, np.exp(-2j * np.pi / 9)])
        cases = [
            ("face ensemble", twirl.face_ensemble(), qubit, True),
            ("SL(2,Z3)", twirl.sl2z3_ensemble(), qutrit, True),
            ("measure-prepare strange", twirl.build_lemma3_channel(named_state("strange"), qutrit), qutrit, True),
            ("явное отображение norrell", twirl.measure_prepare_map("norrell"), qutrit, True),
            ("генераторы Hoggar", hog_gens, self._set("stab", 2, 2, 2), True),
            ("T кутрита", twirl.UnitaryEnsemble.uniform([t_gate], (3,)), qutrit, False),
        ]
        rows = []
        for name, channel, free, expected in cases:
            verdict = twirl.verify_free(channel, free)
            rows.append(flag_row("twirl", f"verify_free: {name} на {free.label}", verdict.free == expected,
                                 detail=f"{verdict.confidence}, нарушение {verdict.worst_violation:.2e}"))
        return rows

    def _check_clifford_magic(self) -> List[CheckRow]:
        rows = []
        for v_label, kind, dims in (("t_qubit", "stab", (2,)), ("t_qutrit", "stab3", (3,))):
            free = self._set(kind, *dims)
            ensemble = twirl.clifford_magic_dephasing(v_label)
            state = named_state(v_label)
            verdict = twirl.verify_free(ensemble, free)
            rows.append(flag_row("twirl", f"дефазировка {v_label} свободна", verdict.free, verdict.confidence))
            rows.append(bound_row("twirl", f"дефазировка стабилизирует {v_label}",
                                  trace_distance(ensemble(state.matrix), state.matrix), 0.0, 1e-9))
            rows.append(close_row("twirl", f"{v_label}: d_min = d_max", measures.d_max(state, free).bits,
                                  measures.d_min(state, free).bits, 1e-6))
        return rows
