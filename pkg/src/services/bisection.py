"""
Бисекция с проверкой собственных значений для SDP с одной переменной.

Допустимое множество {y : sum F_i y - G >= 0, ...} выпукло, то есть является
отрезком прямой; его край ищется делением пополам, а допустимость точки
проверяется наименьшим собственным значением каждого блока. Медленный,
но независимый от ядра внутренней точки: используется как эталон для SDP.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.errors import DimensionMismatch
from src.services.convex import PsdConstraint, SdpProblem

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12
BRACKET = 1e6
MAX_HALVINGS = 200


@dataclass
class BisectionResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    y: Optional[float]


def _min_eigenvalue(problem: SdpProblem, y: float) -> float:
    """Наименьшее собственное значение по всем блокам и строкам в точке y"""
    worst = math.inf
    for blk in problem.blocks:
        mat = -blk.constant + (y * blk.coefficients[0] if blk.variables.size else 0.0)
        worst = min(worst, float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]))
    if problem.ineq_matrix.shape[0]:
        worst = min(worst, float(np.min(problem.ineq_matrix[:, 0] * y - problem.ineq_rhs)))
    if math.isfinite(problem.lower[0]):
        worst = min(worst, y - float(problem.lower[0]))
    return worst


def _feasible(problem: SdpProblem, y: float, tol: float) -> bool:
    return _min_eigenvalue(problem, y) >= -tol


def _anchor(problem: SdpProblem, tol: float, bracket: float) -> Optional[float]:
    """Допустимая точка на сетке 0, +-1, +-2, +-4, ... до bracket"""
    if _feasible(problem, 0.0, tol):
        return 0.0
    step = 1.0
    while step <= bracket:
        for y in (step, -step):
            if _feasible(problem, y, tol):
                return y
        step *= 2.0
    return None


def _edge(problem: SdpProblem, inside: float, outside: float, tol: float) -> float:
    """Край допустимого отрезка между допустимой inside и недопустимой outside"""
    for _ in range(MAX_HALVINGS):
        middle = 0.5 * (inside + outside)
        if middle in (inside, outside):
            break
        if _feasible(problem, middle, tol):
            inside = middle
        else:
            outside = middle
    return inside


def bisection_solve(problem: SdpProblem, tol: float = FEASIBILITY_TOL, bracket: float = BRACKET) -> BisectionResult:
    """
    minimize c y при PSD-блоках, неравенствах и нижней границе от одной переменной y.

    Равенства фиксируют y, если они есть.

    Raises:
        DimensionMismatch: у задачи больше одной переменной
    """
    if problem.variable_count != 1:
        raise DimensionMismatch(f"Бисекция решает задачи с одной переменной, получено {problem.variable_count}")
    c = float(problem.objective[0])

    if problem.eq_matrix.shape[0]:
        coef = problem.eq_matrix[:, 0]
        if np.all(np.abs(coef) <= tol):
            if np.any(np.abs(problem.eq_rhs) > tol):
                return BisectionResult("infeasible", math.inf, None)
        else:
            k = int(np.argmax(np.abs(coef)))
            y = float(problem.eq_rhs[k] / coef[k])
            if np.max(np.abs(coef * y - problem.eq_rhs)) > 1e-9 or not _feasible(problem, y, tol):
                return BisectionResult("infeasible", math.inf, None)
            return BisectionResult("optimal", c * y, y)

    anchor = _anchor(problem, tol, bracket)
    if anchor is None:
        logger.debug(f"[{problem.label}] бисекция: допустимая точка не найдена в [-{bracket:g}, {bracket:g}]")
        return BisectionResult("infeasible", math.inf, None)
    if c == 0.0:
        return BisectionResult("optimal", 0.0, anchor)

    # направление убывания цели
    far = anchor - math.copysign(bracket, c)
    if _feasible(problem, far, tol):
        return BisectionResult("unbounded", -math.inf, None)
    y = _edge(problem, anchor, far, tol)
    logger.debug(f"[{problem.label}] бисекция: y = {y:.12g}, lambda_min = {_min_eigenvalue(problem, y):.2e}")
    return BisectionResult("optimal", c * y, y)


# ========== СЛУЧАЙНЫЕ ЗАДАЧИ ==========

def generalized_eigen_problem(rng: np.random.Generator, blocks: int, dim: int, label: str = "gen_eig") -> SdpProblem:
    """
    minimize t при t B_j - A_j >= 0, j = 1..blocks, B_j > 0.

    Оптимум - наибольшее обобщённое собственное значение пар (A_j, B_j).
    """
    constraints = []
    for _ in range(blocks):
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        a = 0.5 * (g + g.conj().T)
        h = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        b = h @ h.conj().T / dim + np.eye(dim)
        constraints.append(PsdConstraint(constant=a, variables=[0], coefficients=[b]))
    return SdpProblem(variable_count=1, objective=[1.0], blocks=constraints, label=label)
