"""
Двухфазный табличный симплекс-метод с правилом Бланда.

Медленный, но независимый от ядра внутренней точки: используется как
эталон для проверки LP-результатов.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-11


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float
    x: Optional[np.ndarray]


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and tableau[r, col] != 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]


def _run(tableau: np.ndarray, basis: list, allowed: int, max_pivots: int) -> str:
    """Итерации над строками 0..m-1; последняя строка - приведённые стоимости"""
    m = tableau.shape[0] - 1
    for _ in range(max_pivots):
        cost = tableau[-1, :allowed]
        entering = next((j for j in range(allowed) if cost[j] < -PIVOT_TOL), None)
        if entering is None:
            return "optimal"
        column = tableau[:m, entering]
        best_ratio, leaving = math.inf, None
        for i in range(m):
            if column[i] > PIVOT_TOL:
                ratio = tableau[i, -1] / column[i]
                if ratio < best_ratio - PIVOT_TOL or (
                        abs(ratio - best_ratio) <= PIVOT_TOL and leaving is not None and basis[i] < basis[leaving]):
                    best_ratio, leaving = ratio, i
        if leaving is None:
            return "unbounded"
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
    logger.warning(f"⚠️ Симплекс: превышен лимит {max_pivots} опорных шагов")
    return "max_pivots"


def simplex_solve(c: np.ndarray, a: np.ndarray, b: np.ndarray, max_pivots: int = 20000) -> SimplexResult:
    """
    minimize c^T x при A x = b, x >= 0.

    Returns:
        SimplexResult; x = None для несовместных и неограниченных задач
    """
    c = np.asarray(c, dtype=float)
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    m, n = a.shape
    negative = b < 0
    a[negative] *= -1
    b[negative] *= -1

    # фаза 1: искусственные переменные n..n+m-1
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[-1, :n] = -a.sum(axis=0)
    tableau[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(tableau, basis, n + m, max_pivots)
    if -tableau[-1, -1] > 1e-9 * max(1.0, float(np.abs(b).sum())):
        return SimplexResult("infeasible", math.inf, None)

    # вывод искусственных переменных из базиса
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(tableau[i, j]) > PIVOT_TOL), None)
            if j is not None:
                _pivot(tableau, i, j)
                basis[i] = j
    keep = [i for i in range(m) if basis[i] < n]
    tableau = np.vstack([tableau[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # фаза 2
    tableau[-1, :n] = c
    for i, j in enumerate(basis):
        tableau[-1] -= c[j] * tableau[i]
    status = _run(tableau, basis, n, max_pivots)
    if status == "unbounded":
        return SimplexResult("unbounded", -math.inf, None)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = tableau[i, -1]
    return SimplexResult("optimal", float(c @ x), x)
