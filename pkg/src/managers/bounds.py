"""
Замкнутые формулы: границы выход-стоимость, сглаженные меры изотропных
состояний Phi_kappa = kappa Phi + (1 - kappa) sigma* и их проверка
на конвейере мер. Все значения в битах.
"""
import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import BoundOrderingError, OutOfRange, OutOfRegion
from src.managers.measures import ReferenceLadder, one_shot_cost, one_shot_yield
from src.managers.resource_sets import FreeSet
from src.utils.linalg import MatrixLike

logger = logging.getLogger(__name__)

ORDERING_TOL = 1e-12
BISECTION_TOL = 1e-12
VIOLATION_TOL = 1e-6
DISTRIBUTION_TOL = 1e-9


class Region(Enum):
    SQRT = "SqrtRegion"          # eps1 + sqrt(eps2) < 1, обе ветви f определены
    FALLBACK = "FallbackRegion"  # только вторая ветвь


class ClosedFormMode(Enum):
    FULL_DIM = "FullDim"        # D_min = D_s
    REDUCED_DIM = "ReducedDim"  # D_min,aff = D_max


def _log2_inv(x: float) -> float:
    """log2(1/x), +inf для x <= 0"""
    return math.inf if x <= 0.0 else -math.log2(x)


# ========== ПАРА ОШИБОК ==========

@dataclass(frozen=True)
class ErrorPair:
    eps1: float
    eps2: float

    def __post_init__(self):
        if not 0.0 <= self.eps1 < 1.0:
            raise OutOfRange(f"eps1 должен лежать в [0, 1): {self.eps1}")
        if not 0.0 <= self.eps2 <= 1.0:
            raise OutOfRange(f"eps2 должен лежать в [0, 1]: {self.eps2}")

    @property
    def in_region(self) -> bool:
        return self.eps1 + self.eps2 <= 1.0

    @property
    def strictly_inside(self) -> bool:
        return self.eps1 + self.eps2 < 1.0

    @property
    def sqrt_region(self) -> bool:
        return self.eps1 + math.sqrt(self.eps2) < 1.0


def region(e: ErrorPair) -> Region:
    return Region.SQRT if e.sqrt_region else Region.FALLBACK


def _branches(e: ErrorPair) -> Tuple[Optional[float], float]:
    if not e.in_region:
        raise OutOfRegion(f"eps1 + eps2 > 1: ({e.eps1}, {e.eps2})")
    first = 1.0 / (1.0 - e.eps1 - math.sqrt(e.eps2)) if e.sqrt_region else None
    gap = math.sqrt(1.0 - e.eps2) - math.sqrt(e.eps1)
    second = math.inf if gap <= 0.0 else gap ** -2
    return first, second


def f_bound(e: ErrorPair) -> float:
    """
    Множитель f(eps1, eps2) границы d <= c + log f.

    На границе eps1 + sqrt(eps2) = 1 первая ветвь расходится, берётся вторая.
    """
    first, second = _branches(e)
    return second if first is None else min(first, second)


def f_branch(e: ErrorPair) -> str:
    """Какая ветвь f активна: "first" или "second" """
    first, second = _branches(e)
    return "first" if first is not None and first <= second else "second"


def first_branch_preferred(e: ErrorPair) -> bool:
    return f_branch(e) == "first"


def crossing_interval(eps2: float) -> Tuple[float, float]:
    """Отрезок eps1, на котором первая ветвь f не больше второй"""
    if not 0.0 <= eps2 <= 1.0:
        raise OutOfRange(f"eps2 должен лежать в [0, 1]: {eps2}")
    root = math.sqrt(1.0 - eps2)
    scale = 1.0 - math.sqrt(eps2)
    return 0.5 * (1.0 - root) * scale, 0.5 * (1.0 + root) * scale


def eps_prime(e: ErrorPair) -> float:
    """eps' = (sqrt(eps1 (1 - eps2)) + sqrt(eps2 (1 - eps1)))^2"""
    if not e.strictly_inside:
        raise OutOfRegion(f"eps' определён только при eps1 + eps2 < 1: ({e.eps1}, {e.eps2})")
    return (math.sqrt(e.eps1 * (1.0 - e.eps2)) + math.sqrt(e.eps2 * (1.0 - e.eps1))) ** 2


def sqrt_branch_slack(e: ErrorPair) -> float:
    """(1 - eps') - (sqrt(1 - eps2) - sqrt(eps1))^2, неотрицательна внутри области"""
    return (1.0 - eps_prime(e)) - (math.sqrt(1.0 - e.eps2) - math.sqrt(e.eps1)) ** 2


def linear_branch_slack(e: ErrorPair) -> float:
    """(1 - eps') - (1 - eps1 - sqrt(eps2)) при eps1 + sqrt(eps2) < 1"""
    if not e.sqrt_region:
        raise OutOfRegion(f"Нужно eps1 + sqrt(eps2) < 1: ({e.eps1}, {e.eps2})")
    return (1.0 - eps_prime(e)) - (1.0 - e.eps1 - math.sqrt(e.eps2))


# ========== СРАВНЕНИЕ ГРАНИЦ ==========

@dataclass
class BoundReport:
    eps1: float
    eps2: float
    log_f: float
    log_inv_1m_eps_prime: float
    region: Region
    branch: str
    crossing: Tuple[float, float]

    def to_row(self) -> dict:
        row = asdict(self)
        row["region"] = self.region.value
        row["crossing_lo"], row["crossing_hi"] = row.pop("crossing")
        return row


def compare_bounds(e: ErrorPair) -> BoundReport:
    """
    Обе границы для пары ошибок.

    Raises:
        OutOfRegion: eps1 + eps2 >= 1
        BoundOrderingError: граница через eps' хуже границы через f
    """
    ep = eps_prime(e)
    log_f = math.log2(f_bound(e))
    log_thm5 = _log2_inv(1.0 - ep)
    if log_thm5 > log_f + ORDERING_TOL:
        raise BoundOrderingError(
            f"log 1/(1-eps')={log_thm5:.15f} > log f={log_f:.15f} при ({e.eps1}, {e.eps2})")
    return BoundReport(
        eps1=e.eps1,
        eps2=e.eps2,
        log_f=log_f,
        log_inv_1m_eps_prime=log_thm5,
        region=region(e),
        branch=f_branch(e),
        crossing=crossing_interval(e.eps2),
    )


def bound_grid(step: float = 0.01) -> Iterator[ErrorPair]:
    """Узлы сетки (i step, j step) с eps1 + eps2 < 1; координаты считаются от целых индексов"""
    if not 0.0 < step <= 0.5:
        raise OutOfRange(f"Шаг сетки должен лежать в (0, 0.5]: {step}")
    count = int(math.floor(1.0 / step + 1e-9))
    for i in range(count + 1):
        for j in range(count + 1 - i):
            eps1, eps2 = round(i * step, 12), round(j * step, 12)
            if eps1 + eps2 < 1.0 - ORDERING_TOL:
                yield ErrorPair(eps1, eps2)


# ========== КЛАССИЧЕСКАЯ ВЕРНОСТЬ ==========

def classical_fidelity(p: Sequence[float], q: Sequence[float]) -> float:
    """F_cl(p, q) = (sum_i sqrt(p_i q_i))^2"""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise OutOfRange(f"Распределения разной длины: {p.shape} и {q.shape}")
    for dist in (p, q):
        if np.any(dist < -DISTRIBUTION_TOL) or abs(dist.sum() - 1.0) > DISTRIBUTION_TOL:
            raise OutOfRange(f"Не распределение вероятностей: {dist}")
    return float(np.sqrt(np.clip(p, 0.0, None) * np.clip(q, 0.0, None)).sum() ** 2)


def _binary_fidelity(eta: float, kappa: float) -> float:
    return (math.sqrt(eta * kappa) + math.sqrt(max(0.0, (1.0 - eta) * (1.0 - kappa)))) ** 2


def eta_bounds(kappa: float, eps: float) -> Tuple[float, float]:
    """
    Наименьшее и наибольшее eta с F_cl((eta, 1-eta), (kappa, 1-kappa)) >= 1 - eps.

    F_cl унимодальна с максимумом 1 в eta = kappa, поэтому на каждой
    стороне от kappa работает монотонная бисекция.
    """
    if not 0.0 <= kappa <= 1.0 or not 0.0 <= eps <= 1.0:
        raise OutOfRange(f"kappa и eps должны лежать в [0, 1]: {kappa}, {eps}")
    if eps == 0.0:
        return kappa, kappa
    if kappa == 1.0:
        return 1.0 - eps, 1.0
    if kappa == 0.0:
        return 0.0, eps
    target = 1.0 - eps

    if _binary_fidelity(0.0, kappa) >= target:
        eta_min = 0.0
    else:
        lo, hi = 0.0, kappa  # F(lo) < target <= F(hi)
        while hi - lo > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            if _binary_fidelity(mid, kappa) >= target:
                hi = mid
            else:
                lo = mid
        eta_min = hi

    if _binary_fidelity(1.0, kappa) >= target:
        eta_max = 1.0
    else:
        lo, hi = kappa, 1.0  # F(lo) >= target > F(hi)
        while hi - lo > BISECTION_TOL:
            mid = 0.5 * (lo + hi)
            if _binary_fidelity(mid, kappa) >= target:
                lo = mid
            else:
                hi = mid
        eta_max = lo
    return min(max(eta_min, 0.0), 1.0), min(max(eta_max, 0.0), 1.0)


# ========== ЗАМКНУТЫЕ ФОРМЫ ДЛЯ Phi_kappa ==========

@dataclass
class SmoothedForms:
    d_h: float
    d_max_smooth: float
    d_s_smooth: Optional[float] = None


@dataclass
class IsotropicValues:
    d_min: float
    d_max: float
    d_s: Optional[float] = None
    d_min_aff: Optional[float] = None


def _test_vertices(kappa: float, eps: float) -> List[Tuple[float, float]]:
    """Вершины {0 <= eta, lam <= 1 : eta kappa + lam (1 - kappa) >= 1 - eps}"""
    target = 1.0 - eps
    candidates = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    if kappa < 1.0:
        candidates += [(0.0, target / (1.0 - kappa)), (1.0, (target - kappa) / (1.0 - kappa))]
    if kappa > 0.0:
        candidates += [(target / kappa, 0.0), ((target - 1.0 + kappa) / kappa, 1.0)]
    slack = 1e-12
    return [
        (eta, lam) for eta, lam in candidates
        if -slack <= eta <= 1.0 + slack and -slack <= lam <= 1.0 + slack
        and eta * kappa + lam * (1.0 - kappa) >= target - slack
    ]


def _restricted_hypothesis(kappa: float, eps: float, alpha_lo: float, alpha_hi: float) -> float:
    """
    -log max_{alpha} min_{(eta, lam)} [eta alpha + lam (1 - alpha)].

    Тест сведён к eta P* + lam (1 - P*), свободные состояния к
    alpha Phi + (1 - alpha) sigma*. Внутренний минимум вогнут и
    кусочно-линеен по alpha, максимум в концах или точках излома.
    """
    lines = [(lam, eta - lam) for eta, lam in _test_vertices(kappa, eps)]
    alphas = {alpha_lo, alpha_hi}
    for i, (b1, k1) in enumerate(lines):
        for b2, k2 in lines[i + 1:]:
            if abs(k1 - k2) > 1e-15:
                cross = (b2 - b1) / (k1 - k2)
                if alpha_lo <= cross <= alpha_hi:
                    alphas.add(cross)
    best = max(min(b + k * alpha for b, k in lines) for alpha in alphas)
    return max(_log2_inv(best), 0.0)


def closed_form_smoothed(r: float, kappa: float, eps: float,
                         mode: ClosedFormMode = ClosedFormMode.FULL_DIM) -> SmoothedForms:
    """Сглаженные D_H^eps, D_max^eps и (для FullDim) D_s^eps состояния Phi_kappa"""
    if r < 0:
        raise OutOfRange(f"r должно быть неотрицательным: {r}")
    if not 0.0 <= eps < 1.0:
        raise OutOfRange(f"eps должен лежать в [0, 1): {eps}")
    threshold = 2.0 ** -r
    eta_min, eta_max = eta_bounds(kappa, eps)

    if kappa == 1.0:
        d_h = r + _log2_inv(1.0 - eps)
    elif mode is ClosedFormMode.FULL_DIM:
        d_h = 0.0 if eps == 0.0 else _restricted_hypothesis(kappa, eps, 0.0, threshold)
    elif eps == 0.0 and kappa == 0.0:
        d_h = _log2_inv(1.0 - threshold)
    elif eps == 0.0:
        d_h = 0.0
    else:
        d_h = _restricted_hypothesis(kappa, eps, threshold, threshold)

    if mode is ClosedFormMode.FULL_DIM:
        d_max = 0.0 if eta_min <= threshold else r - _log2_inv(eta_min)
        return SmoothedForms(d_h=d_h, d_max_smooth=d_max, d_s_smooth=d_max)

    if eta_min >= threshold:
        d_max = r - _log2_inv(eta_min)
    elif eta_max <= threshold:
        d_max = math.log2((1.0 - eta_max) / (1.0 - threshold))
    else:
        d_max = 0.0
    return SmoothedForms(d_h=d_h, d_max_smooth=max(d_max, 0.0))


def isotropic_exact(r: float, kappa: float,
                    mode: ClosedFormMode = ClosedFormMode.FULL_DIM) -> IsotropicValues:
    """Несглаженные D_min, D_max и D_s (или D_min,aff) состояния Phi_kappa"""
    if r < 0:
        raise OutOfRange(f"r должно быть неотрицательным: {r}")
    if not 0.0 <= kappa <= 1.0:
        raise OutOfRange(f"kappa должна лежать в [0, 1]: {kappa}")
    scaled = r - _log2_inv(kappa)  # -inf при kappa = 0

    if mode is ClosedFormMode.FULL_DIM:
        d_min = r if kappa == 1.0 else 0.0
        d_max = max(scaled, 0.0)
        return IsotropicValues(d_min=d_min, d_max=d_max, d_s=d_max)

    threshold = 2.0 ** -r
    if kappa == 1.0:
        d_min = r
    elif kappa == 0.0:
        d_min = _log2_inv(1.0 - threshold)
    else:
        d_min = 0.0
    mixed = -math.inf if kappa == 1.0 else math.log2((1.0 - kappa) / (1.0 - threshold))
    return IsotropicValues(d_min=d_min, d_max=max(scaled, mixed), d_min_aff=d_min)


# ========== ПРОВЕРКА ВЫХОД-СТОИМОСТЬ ==========

@dataclass
class YieldCostCheck:
    report: BoundReport
    yield_bits: float
    cost_bits: float
    linear_ok: bool
    prime_ok: bool

    @property
    def passed(self) -> bool:
        return self.linear_ok and self.prime_ok


def yield_cost_check(rho: MatrixLike, free: FreeSet, ladder: ReferenceLadder, e: ErrorPair) -> YieldCostCheck:
    """
    Проверка d <= c + log f и d <= c + log 1/(1 - eps') на конвейере мер.

    Нарушение засчитывается только сверх 1e-6.
    """
    report = compare_bounds(e)
    d = one_shot_yield(rho, free, ladder, e.eps1)
    c = one_shot_cost(rho, free, ladder, e.eps2)
    linear_ok = d <= c + report.log_f + VIOLATION_TOL
    prime_ok = d <= c + report.log_inv_1m_eps_prime + VIOLATION_TOL
    if not (linear_ok and prime_ok):
        logger.warning(
            f"⚠️ Нарушение границы выход-стоимость на {free.label}: d={d:.6f}, c={c:.6f}, "
            f"log f={report.log_f:.6f}, log 1/(1-eps')={report.log_inv_1m_eps_prime:.6f}")
    else:
        logger.debug(f"Граница выполнена: d={d:.6f}, c={c:.6f}, eps=({e.eps1}, {e.eps2})")
    return YieldCostCheck(report=report, yield_bits=d, cost_bits=c, linear_ok=linear_ok, prime_ok=prime_ok)
