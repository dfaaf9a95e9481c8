"""
Построитель SDP: аффинные скалярные и матричные выражения от вещественных
переменных, ограничения и компиляция в SdpProblem.

Выражение хранит постоянную часть и стопку коэффициентов по индексам
переменных; повторяющиеся индексы сливаются при сжатии.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from src.errors import DimensionMismatch
from src.services.convex import PsdConstraint, SdpProblem, Solution, SolverSettings, solve_sdp
from src.utils.linalg import dagger, hermitian_basis, partial_transpose

logger = logging.getLogger(__name__)

Number = Union[int, float]


def _compact(idx: np.ndarray, coef: np.ndarray):
    if idx.size == 0:
        return idx, coef
    uniq, inverse = np.unique(idx, return_inverse=True)
    if uniq.size == idx.size and np.all(np.diff(idx) > 0):
        return idx, coef
    merged = np.zeros((uniq.size,) + coef.shape[1:], dtype=coef.dtype)
    np.add.at(merged, inverse, coef)
    return uniq, merged


# ========== СКАЛЯРНЫЕ ВЫРАЖЕНИЯ ==========

class AffineScalar:
    """constant + sum_k coef[k] x[idx[k]] (вещественное)"""

    __slots__ = ("constant", "idx", "coef")
    __array_ufunc__ = None

    def __init__(self, constant: float = 0.0, idx=None, coef=None):
        self.constant = float(constant)
        self.idx = np.zeros(0, dtype=int) if idx is None else np.asarray(idx, dtype=int).reshape(-1)
        self.coef = np.zeros(0) if coef is None else np.asarray(coef, dtype=float).reshape(-1)
        self.idx, self.coef = _compact(self.idx, self.coef)

    @staticmethod
    def lift(value: Union["AffineScalar", Number]) -> "AffineScalar":
        return value if isinstance(value, AffineScalar) else AffineScalar(float(value))

    def __add__(self, other):
        other = AffineScalar.lift(other)
        return AffineScalar(self.constant + other.constant,
                            np.concatenate([self.idx, other.idx]),
                            np.concatenate([self.coef, other.coef]))

    __radd__ = __add__

    def __neg__(self):
        return AffineScalar(-self.constant, self.idx, -self.coef)

    def __sub__(self, other):
        return self + (-AffineScalar.lift(other))

    def __rsub__(self, other):
        return AffineScalar.lift(other) - self

    def __mul__(self, k: Number):
        return AffineScalar(self.constant * k, self.idx, self.coef * k)

    __rmul__ = __mul__

    def __truediv__(self, k: Number):
        return self * (1.0 / k)

    def dense(self, n: int) -> np.ndarray:
        row = np.zeros(n)
        np.add.at(row, self.idx, self.coef)
        return row

    def evaluate(self, x: np.ndarray) -> float:
        return self.constant + float(self.coef @ x[self.idx]) if self.idx.size else self.constant


# ========== МАТРИЧНЫЕ ВЫРАЖЕНИЯ ==========

class AffineMatrix:
    """constant + sum_k x[idx[k]] coef[k] (комплексные матрицы r x c)"""

    __slots__ = ("constant", "idx", "coef")
    __array_ufunc__ = None

    def __init__(self, constant: np.ndarray, idx=None, coef=None):
        self.constant = np.asarray(constant, dtype=complex)
        shape = self.constant.shape
        self.idx = np.zeros(0, dtype=int) if idx is None else np.asarray(idx, dtype=int).reshape(-1)
        self.coef = (np.zeros((0,) + shape, dtype=complex) if coef is None
                     else np.asarray(coef, dtype=complex).reshape((len(self.idx),) + shape))
        self.idx, self.coef = _compact(self.idx, self.coef)

    @property
    def shape(self):
        return self.constant.shape

    @staticmethod
    def lift(value: Union["AffineMatrix", np.ndarray]) -> "AffineMatrix":
        return value if isinstance(value, AffineMatrix) else AffineMatrix(np.asarray(value, dtype=complex))

    def _check_shape(self, other: "AffineMatrix"):
        if self.shape != other.shape:
            raise DimensionMismatch(f"Размеры выражений не совпадают: {self.shape} и {other.shape}")

    def __add__(self, other):
        other = AffineMatrix.lift(other)
        self._check_shape(other)
        return AffineMatrix(self.constant + other.constant,
                            np.concatenate([self.idx, other.idx]),
                            np.concatenate([self.coef, other.coef]))

    __radd__ = __add__

    def __neg__(self):
        return AffineMatrix(-self.constant, self.idx, -self.coef)

    def __sub__(self, other):
        return self + (-AffineMatrix.lift(other))

    def __rsub__(self, other):
        return AffineMatrix.lift(other) - self

    def __mul__(self, k: Union[Number, complex]):
        return AffineMatrix(self.constant * k, self.idx, self.coef * k)

    __rmul__ = __mul__

    def __truediv__(self, k: Number):
        return self * (1.0 / k)

    def __matmul__(self, m: np.ndarray):
        m = np.asarray(m, dtype=complex)
        return AffineMatrix(self.constant @ m, self.idx, self.coef @ m)

    def __rmatmul__(self, m: np.ndarray):
        m = np.asarray(m, dtype=complex)
        return AffineMatrix(m @ self.constant, self.idx, m @ self.coef)

    @property
    def H(self) -> "AffineMatrix":
        return AffineMatrix(self.constant.conj().T, self.idx, dagger(self.coef))

    def trace(self) -> AffineScalar:
        return AffineScalar(np.trace(self.constant).real, self.idx,
                            np.trace(self.coef, axis1=1, axis2=2).real)

    def real_trace_with(self, m: np.ndarray) -> AffineScalar:
        """Re Tr[m X]"""
        m = np.asarray(m, dtype=complex)
        return AffineScalar(np.sum(m.T * self.constant).real, self.idx,
                            np.einsum("ji,kij->k", m, self.coef).real)

    def partial_transpose(self, dims: Sequence[int], subsystem: int = 1) -> "AffineMatrix":
        coef = np.stack([partial_transpose(c, dims, subsystem) for c in self.coef]) if self.idx.size \
            else self.coef
        return AffineMatrix(partial_transpose(self.constant, dims, subsystem), self.idx, coef)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        if not self.idx.size:
            return self.constant.copy()
        return self.constant + np.tensordot(x[self.idx], self.coef, axes=1)

    @staticmethod
    def block(rows: Sequence[Sequence[Union["AffineMatrix", np.ndarray]]]) -> "AffineMatrix":
        """Блочная матрица из выражений и констант"""
        grid = [[AffineMatrix.lift(entry) for entry in row] for row in rows]
        heights = [row[0].shape[0] for row in grid]
        widths = [entry.shape[1] for entry in grid[0]]
        for r, row in enumerate(grid):
            for c, entry in enumerate(row):
                if entry.shape != (heights[r], widths[c]):
                    raise DimensionMismatch(f"Блок ({r}, {c}) имеет размер {entry.shape}")
        constant = np.block([[entry.constant for entry in row] for row in grid])
        idx_parts, coef_parts = [], []
        row_off = np.cumsum([0] + heights)
        col_off = np.cumsum([0] + widths)
        for r, row in enumerate(grid):
            for c, entry in enumerate(row):
                if not entry.idx.size:
                    continue
                part = np.zeros((entry.idx.size,) + constant.shape, dtype=complex)
                part[:, row_off[r]:row_off[r + 1], col_off[c]:col_off[c + 1]] = entry.coef
                idx_parts.append(entry.idx)
                coef_parts.append(part)
        if not idx_parts:
            return AffineMatrix(constant)
        return AffineMatrix(constant, np.concatenate(idx_parts), np.concatenate(coef_parts))


# ========== МОДЕЛЬ ==========

@dataclass
class ModelSolution:
    value: float
    x: np.ndarray
    solution: Solution

    @property
    def status(self):
        return self.solution.status

    def psd_dual(self, handle: int) -> np.ndarray:
        return self.solution.dual.blocks[handle]

    def eq_dual(self, handle: int) -> float:
        return float(self.solution.dual.eq[handle])

    def ineq_dual(self, handle: int) -> float:
        return float(self.solution.dual.ineq[handle])


class ConicModel:
    """
    Накопитель переменных и ограничений.

    Методы add_* возвращают номер ограничения своего вида; по нему
    достаётся двойственная переменная из ModelSolution.
    """

    def __init__(self, label: str = "model"):
        self.label = label
        self._lower: List[float] = []
        self._psd: List[AffineMatrix] = []
        self._ineq: List[AffineScalar] = []
        self._eq: List[AffineScalar] = []
        self._objective = AffineScalar()
        self._maximize = False

    @property
    def variable_count(self) -> int:
        return len(self._lower)

    # ---------- переменные ----------

    def variables(self, count: int, lower: float = -math.inf) -> np.ndarray:
        start = len(self._lower)
        self._lower.extend([float(lower)] * count)
        return np.arange(start, start + count)

    def scalar(self, lower: float = -math.inf) -> AffineScalar:
        idx = self.variables(1, lower)
        return AffineScalar(0.0, idx, [1.0])

    def nonneg_vector(self, count: int) -> np.ndarray:
        return self.variables(count, 0.0)

    def hermitian(self, dim: int) -> AffineMatrix:
        basis = hermitian_basis(dim)
        idx = self.variables(basis.shape[0])
        return AffineMatrix(np.zeros((dim, dim), dtype=complex), idx, basis)

    def complex_matrix(self, rows: int, cols: int) -> AffineMatrix:
        units = np.zeros((rows * cols, rows, cols), dtype=complex)
        units[np.arange(rows * cols), np.repeat(np.arange(rows), cols), np.tile(np.arange(cols), rows)] = 1.0
        idx = self.variables(2 * rows * cols)
        return AffineMatrix(np.zeros((rows, cols), dtype=complex), idx, np.concatenate([units, 1j * units]))

    @staticmethod
    def combination(idx: np.ndarray, mats: np.ndarray) -> AffineMatrix:
        """sum_k x[idx[k]] mats[k]"""
        mats = np.asarray(mats, dtype=complex)
        return AffineMatrix(np.zeros(mats.shape[1:], dtype=complex), idx, mats)

    @staticmethod
    def weighted_sum(idx: np.ndarray, weights: Optional[np.ndarray] = None) -> AffineScalar:
        weights = np.ones(len(idx)) if weights is None else np.asarray(weights, dtype=float)
        return AffineScalar(0.0, idx, weights)

    # ---------- ограничения ----------

    def add_psd(self, expr: AffineMatrix) -> int:
        """expr >= 0 в смысле PSD; выражение считается эрмитовым"""
        expr = AffineMatrix.lift(expr)
        if expr.shape[0] != expr.shape[1]:
            raise DimensionMismatch(f"PSD-ограничение требует квадратного выражения, получено {expr.shape}")
        self._psd.append(expr)
        return len(self._psd) - 1

    def add_ge(self, expr: Union[AffineScalar, Number], rhs: Number = 0.0) -> int:
        self._ineq.append(AffineScalar.lift(expr) - rhs)
        return len(self._ineq) - 1

    def add_le(self, expr: Union[AffineScalar, Number], rhs: Number = 0.0) -> int:
        self._ineq.append(rhs - AffineScalar.lift(expr))
        return len(self._ineq) - 1

    def add_eq(self, expr: Union[AffineScalar, Number], rhs: Number = 0.0) -> int:
        self._eq.append(AffineScalar.lift(expr) - rhs)
        return len(self._eq) - 1

    def add_matrix_eq(self, lhs: AffineMatrix, rhs: Union[AffineMatrix, np.ndarray]) -> List[int]:
        """Равенство эрмитовых выражений покоординатно в ортонормированном базисе"""
        diff = AffineMatrix.lift(lhs) - rhs
        return [self.add_eq(diff.real_trace_with(b)) for b in hermitian_basis(diff.shape[0])]

    def minimize(self, expr: Union[AffineScalar, Number]) -> None:
        self._objective = AffineScalar.lift(expr)
        self._maximize = False

    def maximize(self, expr: Union[AffineScalar, Number]) -> None:
        self._objective = AffineScalar.lift(expr)
        self._maximize = True

    # ---------- компиляция ----------

    def compile(self) -> SdpProblem:
        n = self.variable_count
        objective = self._objective.dense(n)
        if self._maximize:
            objective = -objective
        blocks = []
        for expr in self._psd:
            constant = 0.5 * (expr.constant + expr.constant.conj().T)
            coef = 0.5 * (expr.coef + dagger(expr.coef))
            blocks.append(PsdConstraint(constant=-constant, variables=expr.idx, coefficients=coef))
        eq_matrix = np.array([e.dense(n) for e in self._eq]).reshape(-1, n)
        eq_rhs = np.array([-e.constant for e in self._eq])
        ineq_matrix = np.array([e.dense(n) for e in self._ineq]).reshape(-1, n)
        ineq_rhs = np.array([-e.constant for e in self._ineq])
        logger.debug(f"[{self.label}] модель: {n} переменных, {len(blocks)} PSD-блоков, "
                     f"{len(self._eq)} равенств, {len(self._ineq)} неравенств")
        return SdpProblem(variable_count=n, objective=objective, blocks=blocks,
                          eq_matrix=eq_matrix, eq_rhs=eq_rhs,
                          ineq_matrix=ineq_matrix, ineq_rhs=ineq_rhs,
                          lower=np.array(self._lower), label=self.label)

    def solve(self, settings: Optional[SolverSettings] = None) -> ModelSolution:
        solution = solve_sdp(self.compile(), settings)
        if self._maximize:
            value = -solution.value
        else:
            value = solution.value
        if math.isfinite(value):
            value += self._objective.constant
        return ModelSolution(value=value, x=solution.primal, solution=solution)
