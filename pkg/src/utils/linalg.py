"""
Плотная комплексная линейная алгебра: матрицы плотности, спектральное
разложение, верность и расстояния, тензорные произведения, операторы Паули
и Вейля, частичное транспонирование.

Логарифмы везде по основанию 2 (биты).
"""
import logging
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from cachetools import LRUCache, cached

from src.errors import DimensionMismatch, IndexOutOfRange, InvalidState, NonHermitian

logger = logging.getLogger(__name__)

# ========== ДОПУСКИ ==========
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
NORM_TOL = 1e-12
RANK_TOL = 1e-8

ComplexMatrix = np.ndarray
MatrixLike = Union["DensityMatrix", "PureState", np.ndarray]

PAULI_LABELS = "IXYZ"
_PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


# ========== ТИПЫ ==========

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Эрмитова, положительная, единичного следа матрица с разбиением на подсистемы"""
    matrix: np.ndarray
    dims: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidState(f"Матрица плотности должна быть квадратной, получено {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InvalidState("Матрица содержит нечисловые элементы")
        dims = tuple(int(d) for d in self.dims) if self.dims else (mat.shape[0],)
        if int(np.prod(dims)) != mat.shape[0]:
            raise DimensionMismatch(f"Произведение размерностей {dims} != {mat.shape[0]}")
        check_hermitian(mat)
        mat = 0.5 * (mat + mat.conj().T)
        trace = float(np.trace(mat).real)
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvalidState(f"След матрицы плотности {trace:.3e} != 1")
        min_eig = float(scipy.linalg.eigvalsh(mat)[0])
        if min_eig < -PSD_TOL:
            raise InvalidState(f"Отрицательное собственное значение {min_eig:.3e}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, state: Union["PureState", np.ndarray], dims: Sequence[int] = ()) -> "DensityMatrix":
        if isinstance(state, PureState):
            return state.density()
        vec = np.asarray(state, dtype=complex).reshape(-1)
        return cls(np.outer(vec, vec.conj()), tuple(dims))

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        d = int(np.prod(dims))
        return cls(np.eye(d, dtype=complex) / d, tuple(dims))

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix), self.dims + other.dims)

    def expectation(self, operator: np.ndarray) -> float:
        return float(np.real(np.trace(operator @ self.matrix)))


@dataclass(frozen=True, eq=False)
class PureState:
    """Нормированный вектор состояния"""
    amplitudes: np.ndarray
    dims: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        vec = np.array(self.amplitudes, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidState(f"Норма вектора состояния {norm:.15f} != 1")
        dims = tuple(int(d) for d in self.dims) if self.dims else (vec.shape[0],)
        if int(np.prod(dims)) != vec.shape[0]:
            raise DimensionMismatch(f"Произведение размерностей {dims} != {vec.shape[0]}")
        vec.setflags(write=False)
        object.__setattr__(self, "amplitudes", vec)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def normalized(cls, amplitudes: Iterable[complex], dims: Sequence[int] = ()) -> "PureState":
        vec = np.asarray(list(amplitudes), dtype=complex)
        return cls(vec / np.linalg.norm(vec), tuple(dims))

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims)


def as_array(x: MatrixLike) -> np.ndarray:
    """Приводит DensityMatrix, PureState или массив к комплексной матрице"""
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, PureState):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    return np.asarray(x, dtype=complex)


def as_density(x: MatrixLike, dims: Sequence[int] = ()) -> DensityMatrix:
    if isinstance(x, DensityMatrix):
        return x
    if isinstance(x, PureState):
        return x.density()
    return DensityMatrix(np.asarray(x, dtype=complex), tuple(dims))


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"Ожидалась квадратная матрица, получено {a.shape}")
    deviation = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if deviation > tol * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0):
        raise NonHermitian(f"Отклонение от эрмитовости {deviation:.3e}")


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol))


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"Размерности не совпадают: {a.shape} и {b.shape}")


# ========== СПЕКТРАЛЬНОЕ РАЗЛОЖЕНИЕ ==========

def real_embedding(a: np.ndarray) -> np.ndarray:
    """Вещественное вложение [[Re, -Im], [Im, Re]] комплексной матрицы"""
    re, im = a.real, a.imag
    return np.block([[re, -im], [im, re]])


def complex_from_embedding(m: np.ndarray) -> np.ndarray:
    """Обратное к real_embedding на матрицах вложенной структуры"""
    d = m.shape[0] // 2
    m11, m12, m21, m22 = m[:d, :d], m[:d, d:], m[d:, :d], m[d:, d:]
    return 0.5 * (m11 + m22) + 0.5j * (m21 - m12)


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 64) -> Tuple[np.ndarray, np.ndarray]:
    """
    Циклический метод Якоби для вещественной симметричной матрицы.

    Returns:
        (собственные значения, собственные векторы по столбцам), без сортировки
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))
    for sweep in range(max_sweeps):
        off = math.sqrt(float(np.sum(a ** 2) - np.sum(np.diag(a) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        logger.warning(f"⚠️ Якоби не сошёлся за {max_sweeps} проходов (n={n})")
    return np.diag(a).copy(), v


def _jacobi_herm_eig(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = a.shape[0]
    w_real, v_real = jacobi_eigh(real_embedding(a))
    order = np.argsort(-w_real)
    w_real, v_real = w_real[order], v_real[:, order]
    candidates = v_real[:d, :] + 1j * v_real[d:, :]

    scale = max(1.0, float(np.max(np.abs(w_real))))
    vectors: List[np.ndarray] = []
    start = 0
    while start < 2 * d:
        stop = start + 1
        while stop < 2 * d and abs(w_real[stop] - w_real[start]) <= 1e-9 * scale:
            stop += 1
        # кратность в комплексном пространстве вдвое меньше вещественной
        k = max(1, int(round((stop - start) / 2)))
        u, _, _ = np.linalg.svd(candidates[:, start:stop], full_matrices=False)
        vectors.extend(u[:, j] for j in range(min(k, u.shape[1])))
        start = stop

    basis = np.column_stack(vectors[:d])
    # повторная ортонормировка на случай слияния близких кластеров
    basis, _ = np.linalg.qr(basis)
    values = np.real(np.einsum("ij,ik,kj->j", basis.conj(), a, basis))
    order = np.argsort(-values)
    return values[order], basis[:, order]


def herm_eig(a: np.ndarray, method: str = "lapack") -> Tuple[np.ndarray, np.ndarray]:
    """
    Спектральное разложение эрмитовой матрицы.

    Args:
        a: эрмитова матрица
        method: "lapack" (scipy.linalg.eigh) или "jacobi" (вещественное вложение)

    Returns:
        (собственные значения по убыванию, унитарная матрица собственных векторов)
    """
    a = as_array(a)
    check_hermitian(a)
    a = 0.5 * (a + a.conj().T)
    if method == "jacobi":
        return _jacobi_herm_eig(a)
    if method != "lapack":
        raise ValueError(f"Неизвестный метод спектрального разложения: {method}")
    w, v = scipy.linalg.eigh(a)
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = herm_eig(a)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def trace_norm(a: np.ndarray) -> float:
    a = as_array(a)
    return float(np.sum(np.abs(scipy.linalg.eigvalsh(0.5 * (a + a.conj().T)))))


# ========== ВЕРНОСТЬ И РАССТОЯНИЯ ==========

def fidelity(rho: MatrixLike, sigma: MatrixLike) -> float:
    """F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2"""
    a, b = as_array(rho), as_array(sigma)
    _check_same_dim(a, b)
    root = psd_sqrt(a)
    inner = root @ b @ root
    w = np.clip(scipy.linalg.eigvalsh(0.5 * (inner + inner.conj().T)), 0.0, None)
    return float(min(1.0, max(0.0, np.sum(np.sqrt(w)) ** 2)))


def trace_distance(rho: MatrixLike, sigma: MatrixLike) -> float:
    a, b = as_array(rho), as_array(sigma)
    _check_same_dim(a, b)
    return float(min(1.0, 0.5 * trace_norm(a - b)))


def purified_distance(rho: MatrixLike, sigma: MatrixLike) -> float:
    return math.sqrt(max(0.0, 1.0 - fidelity(rho, sigma)))


def support_projector(rho: MatrixLike, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Проектор на носитель: собственные векторы с собственными значениями выше rank_tol"""
    w, v = herm_eig(as_array(rho))
    kept = v[:, w > rank_tol]
    return kept @ kept.conj().T


# ========== ТЕНЗОРНЫЕ ПРОИЗВЕДЕНИЯ ==========

def kron(*ops: np.ndarray) -> np.ndarray:
    if not ops:
        raise DimensionMismatch("kron требует хотя бы один аргумент")
    return reduce(np.kron, [as_array(op) for op in ops])


def partial_transpose(rho: MatrixLike, dims: Sequence[int], subsystem: int = 1) -> np.ndarray:
    """Частичное транспонирование по подсистеме subsystem (нумерация с нуля)"""
    a = as_array(rho)
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    if int(np.prod(dims)) != a.shape[0] or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"Размерности {dims} не согласованы с матрицей {a.shape}")
    if not 0 <= subsystem < n:
        raise IndexOutOfRange(f"Подсистема {subsystem} вне диапазона 0..{n - 1}")
    axes = list(range(2 * n))
    axes[subsystem], axes[n + subsystem] = axes[n + subsystem], axes[subsystem]
    return a.reshape(dims + dims).transpose(axes).reshape(a.shape)


# ========== ОПЕРАТОРЫ ПАУЛИ И ВЕЙЛЯ ==========

def qudit_shift(d: int) -> np.ndarray:
    """X|j> = |j+1 mod d>"""
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def qudit_clock(d: int) -> np.ndarray:
    """Z|j> = w^j |j>, w = exp(2 pi i / d)"""
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


def pauli_label(n: int, index: int) -> str:
    if not 0 <= index < 4 ** n:
        raise IndexOutOfRange(f"Индекс строки Паули {index} вне диапазона 0..{4 ** n - 1}")
    digits = []
    for _ in range(n):
        digits.append(PAULI_LABELS[index % 4])
        index //= 4
    return "".join(reversed(digits))


def pauli_string(n: int, index: Union[int, str]) -> np.ndarray:
    """
    Строка Паули на n кубитах.

    Args:
        n: число кубитов
        index: целое в системе счисления по основанию 4 (0=I, 1=X, 2=Y, 3=Z,
            старший разряд - первый кубит) или строка вида "XZI"
    """
    label = pauli_label(n, index) if isinstance(index, (int, np.integer)) else str(index).upper()
    if len(label) != n or any(ch not in PAULI_LABELS for ch in label):
        raise IndexOutOfRange(f"Некорректная строка Паули {index!r} для n={n}")
    return kron(*[_PAULI_MATRICES[ch] for ch in label])


@cached(LRUCache(maxsize=8))
def pauli_group(n: int) -> np.ndarray:
    """Все 4^n строк Паули, массив формы (4^n, 2^n, 2^n)"""
    stack = np.stack([pauli_string(n, k) for k in range(4 ** n)])
    stack.setflags(write=False)
    return stack


def weyl_operator(d: int, k1: int, k2: int) -> np.ndarray:
    """D_k = -exp(i pi / d) X^k1 Z^k2"""
    if not (0 <= k1 < d and 0 <= k2 < d):
        raise IndexOutOfRange(f"Индексы Вейля ({k1}, {k2}) вне диапазона для d={d}")
    x = np.linalg.matrix_power(qudit_shift(d), k1)
    z = np.linalg.matrix_power(qudit_clock(d), k2)
    return -np.exp(1j * np.pi / d) * (x @ z)


# ========== ЭРМИТОВ БАЗИС И КООРДИНАТЫ ==========

@cached(LRUCache(maxsize=16))
def hermitian_basis(d: int) -> np.ndarray:
    """Ортонормированный (по Tr[A B]) базис эрмитовых матриц, форма (d^2, d, d)"""
    basis = []
    for k in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[k, k] = 1.0
        basis.append(e)
    for k in range(d):
        for l in range(k + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[k, l] = e[l, k] = 1.0 / math.sqrt(2.0)
            basis.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[k, l] = 1j / math.sqrt(2.0)
            f[l, k] = -1j / math.sqrt(2.0)
            basis.append(f)
    stack = np.stack(basis)
    stack.setflags(write=False)
    return stack


@cached(LRUCache(maxsize=16))
def traceless_basis(d: int) -> np.ndarray:
    """Ортонормированный базис бесследовых эрмитовых матриц (обобщённые матрицы Гелл-Манна)"""
    full = hermitian_basis(d)
    diagonal = []
    for l in range(1, d):
        e = np.zeros((d, d), dtype=complex)
        for j in range(l):
            e[j, j] = 1.0
        e[l, l] = -float(l)
        diagonal.append(e / math.sqrt(l * (l + 1)))
    stack = np.concatenate([np.stack(diagonal), full[d:]]) if d > 1 else np.zeros((0, 1, 1), dtype=complex)
    stack.setflags(write=False)
    return stack


def to_real_coordinates(a: np.ndarray) -> np.ndarray:
    """Координаты эрмитовой матрицы (или стопки матриц) в hermitian_basis"""
    a = np.asarray(a, dtype=complex)
    basis = hermitian_basis(a.shape[-1])
    if a.ndim == 2:
        return np.einsum("kij,ji->k", basis, a).real
    return np.einsum("kij,nji->nk", basis, a).real


def from_real_coordinates(x: np.ndarray, d: int) -> np.ndarray:
    return np.einsum("k,kij->ij", np.asarray(x, dtype=float), hermitian_basis(d))


# ========== ВЕКТОРЫ И СЛУЧАЙНЫЕ ОБЪЕКТЫ ==========

def ket(d: int, index: int) -> np.ndarray:
    if not 0 <= index < d:
        raise IndexOutOfRange(f"Базисный вектор {index} вне диапазона 0..{d - 1}")
    v = np.zeros(d, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Унитарная матрица по мере Хаара (QR гиниброва ансамбля с фиксацией фаз)"""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def random_density_matrix(d: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)
