"""
Свободные множества: выпуклые оболочки стабилизаторных и диагональных
состояний, SDP-конусы (PPT, когерентность), аффинные оболочки, проверка
принадлежности и каталог именованных состояний.
"""
import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from cachetools import LRUCache

from src import config
from src.errors import (
    DimensionMismatch,
    InvalidState,
    NotOrthogonal,
    OutOfRange,
    ResourceError,
    UnknownLabel,
)
from src.services.conic_model import ConicModel, ModelSolution
from src.services.convex import SolutionStatus
from src.utils.linalg import (
    RANK_TOL,
    DensityMatrix,
    MatrixLike,
    PureState,
    as_array,
    as_density,
    from_real_coordinates,
    kron,
    partial_transpose,
    projector,
    to_real_coordinates,
    traceless_basis,
)

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-7
OVERLAP_DEDUP_TOL = 1e-8

# d^n prod_{k=1..n} (d^k + 1)
EXPECTED_STABILIZER_COUNTS = {
    (2, 1): 6, (2, 2): 60, (2, 3): 1080,
    (3, 1): 12, (3, 2): 360,
}
MAX_QUBITS = 3
MAX_QUTRITS = 2


class SetKind(Enum):
    VERTEX_HULL = "VertexHull"
    SDP_CONE = "SdpCone"


@dataclass(frozen=True, eq=False)
class ConeRule:
    """
    Описание SDP-конуса: X >= 0 и дополнительно
    - ppt_dims: частичное транспонирование по последней подсистеме >= 0
    - diagonal: внедиагональные элементы равны нулю
    - generators: X лежит в конусе, натянутом на эти состояния
    """
    ppt_dims: Optional[Tuple[int, ...]] = None
    diagonal: bool = False
    generators: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class FreeSet:
    label: str
    kind: SetKind
    dims: Tuple[int, ...]
    affine_basis: np.ndarray
    vertices: Optional[np.ndarray] = None
    vectors: Optional[np.ndarray] = None
    rule: Optional[ConeRule] = None
    full_dimensional: bool = False

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def vertex_count(self) -> int:
        return 0 if self.vertices is None else self.vertices.shape[0]

    @property
    def is_hull(self) -> bool:
        return self.kind is SetKind.VERTEX_HULL

    @cached_property
    def vertex_coordinates(self) -> np.ndarray:
        return to_real_coordinates(self.vertices)

    @cached_property
    def contains_full_rank_state(self) -> bool:
        if self.is_hull:
            return int(np.linalg.matrix_rank(self.vertices.sum(axis=0), hermitian=True)) == self.dim
        if self.rule.generators is not None:
            return int(np.linalg.matrix_rank(self.rule.generators.sum(axis=0), hermitian=True)) == self.dim
        return True

    def vertex(self, k: int) -> DensityMatrix:
        return DensityMatrix(self.vertices[k], self.dims)

    def describe(self) -> str:
        size = f"{self.vertex_count} вершин" if self.is_hull else "SDP-конус"
        return f"{self.label} {self.dims} ({size}, aff dim {self.affine_basis.shape[0]})"


# ========== АФФИННАЯ ОБОЛОЧКА ==========

def affine_hull_basis(vertices: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    Ортонормированный базис направлений aff(vertices) методом Грама-Шмидта
    на разностях вершин в координатах эрмитова базиса.

    Returns:
        Стопка бесследовых эрмитовых матриц формы (r, d, d)
    """
    d = vertices.shape[-1]
    coords = to_real_coordinates(vertices)
    diffs = coords[1:] - coords[0]
    limit = d * d - 1
    accepted: List[np.ndarray] = []
    for v in diffs:
        w = v.copy()
        for _ in range(2):
            for b in accepted:
                w -= (b @ w) * b
        norm = float(np.linalg.norm(w))
        if norm > rank_tol:
            accepted.append(w / norm)
            if len(accepted) == limit:
                break
    if len(accepted) == limit:
        return traceless_basis(d)
    if not accepted:
        return np.zeros((0, d, d), dtype=complex)
    return np.stack([from_real_coordinates(b, d) for b in accepted])


def _is_full_dimensional(basis: np.ndarray) -> bool:
    d = basis.shape[-1]
    return basis.shape[0] == d * d - 1


def vertex_hull(label: str, vertices: np.ndarray, dims: Sequence[int],
                vectors: Optional[np.ndarray] = None) -> FreeSet:
    vertices = np.asarray(vertices, dtype=complex)
    dims = tuple(int(d) for d in dims)
    for k, v in enumerate(vertices):
        try:
            DensityMatrix(v, dims)
        except InvalidState as e:
            raise InvalidState(f"Вершина {k} множества {label}: {e}")
    basis = affine_hull_basis(vertices)
    vertices.setflags(write=False)
    if vectors is not None:
        vectors = np.asarray(vectors, dtype=complex)
        vectors.setflags(write=False)
    return FreeSet(label=label, kind=SetKind.VERTEX_HULL, dims=dims, affine_basis=basis,
                   vertices=vertices, vectors=vectors, full_dimensional=_is_full_dimensional(basis))


# ========== ГЕНЕРАТОРЫ КЛИФФОРДА ==========

def _single_site(gate: np.ndarray, site: int, d: int, n: int) -> np.ndarray:
    ops = [np.eye(d, dtype=complex)] * n
    ops[site] = gate
    return kron(*ops)


def _controlled_sum(control: int, target: int, d: int, n: int) -> np.ndarray:
    """|..a..b..> -> |..a..(a+b mod d)..>; при d=2 это CNOT"""
    size = d ** n
    digits = np.array(np.unravel_index(np.arange(size), (d,) * n))
    digits[target] = (digits[target] + digits[control]) % d
    image = np.ravel_multi_index(tuple(digits), (d,) * n)
    u = np.zeros((size, size), dtype=complex)
    u[image, np.arange(size)] = 1.0
    return u


def single_qudit_cliffords(d: int) -> Dict[str, np.ndarray]:
    if d == 2:
        return {
            "H": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0),
            "S": np.diag([1.0, 1j]).astype(complex),
        }
    if d == 3:
        omega = np.exp(2j * np.pi / 3)
        j = np.arange(3)
        return {
            "F": omega ** np.outer(j, j) / math.sqrt(3.0),
            "S": np.diag([1.0, 1.0, omega]).astype(complex),
        }
    raise OutOfRange(f"Генераторы Клиффорда заданы только для d=2 и d=3, получено d={d}")


def clifford_generators(d: int, n: int) -> Dict[str, np.ndarray]:
    """H/S (F/S для кутритов) на каждой подсистеме и CNOT (SUM) на каждой упорядоченной паре"""
    gens: Dict[str, np.ndarray] = {}
    for name, gate in single_qudit_cliffords(d).items():
        for site in range(n):
            gens[f"{name}{site}"] = _single_site(gate, site, d, n)
    two = "CNOT" if d == 2 else "SUM"
    for c in range(n):
        for t in range(n):
            if c != t:
                gens[f"{two}{c}{t}"] = _controlled_sum(c, t, d, n)
    return gens


def _orbit(d: int, n: int, track: bool = False):
    """
    Обход в ширину орбиты |0...0> под генераторами Клиффорда.

    Дубликаты отсекаются по |<v|w>|^2 > 1 - 1e-8, то есть по проекторам,
    глобальная фаза при этом не различается.
    """
    gens = list(clifford_generators(d, n).values())
    size = d ** n
    start = np.zeros(size, dtype=complex)
    start[0] = 1.0
    known = [start]
    unitaries = [np.eye(size, dtype=complex)] if track else None
    frontier = np.array([start])
    frontier_u = [np.eye(size, dtype=complex)] if track else None
    while frontier.shape[0]:
        new_vecs: List[np.ndarray] = []
        new_u: List[np.ndarray] = []
        known_arr = np.array(known)
        for g in gens:
            images = frontier @ g.T
            overlaps = np.abs(known_arr.conj() @ images.T) ** 2
            fresh = np.flatnonzero(overlaps.max(axis=0) < 1.0 - OVERLAP_DEDUP_TOL)
            for i in fresh:
                v = images[i]
                if new_vecs and np.max(np.abs(np.array(new_vecs).conj() @ v) ** 2) >= 1.0 - OVERLAP_DEDUP_TOL:
                    continue
                new_vecs.append(v)
                if track:
                    new_u.append(g @ frontier_u[i])
        known.extend(new_vecs)
        if track:
            unitaries.extend(new_u)
            frontier_u = new_u
        frontier = np.array(new_vecs).reshape(-1, size)
        logger.debug(f"Орбита d={d} n={n}: слой +{len(new_vecs)}, всего {len(known)}")
    return np.array(known), unitaries


def _enumerate_stabilizers(d: int, n: int, max_n: int) -> FreeSet:
    if not 1 <= n <= max_n:
        raise OutOfRange(f"Стабилизаторные состояния для d={d} поддерживаются при 1 <= n <= {max_n}, получено {n}")
    vectors, _ = _orbit(d, n)
    expected = EXPECTED_STABILIZER_COUNTS[(d, n)]
    if vectors.shape[0] != expected:
        logger.error(f"❌ Перечисление стабилизаторов d={d} n={n}: {vectors.shape[0]} вместо {expected}")
        raise ResourceError(f"Число стабилизаторных состояний {vectors.shape[0]} != {expected}")
    vertices = np.einsum("ki,kj->kij", vectors, vectors.conj())
    label = "stab" if d == 2 else "stab3"
    free = vertex_hull(label, vertices, (d,) * n, vectors=vectors)
    logger.info(f"✅ Построено множество {free.describe()}")
    return free


def stabilizer_states(n: int) -> FreeSet:
    """Выпуклая оболочка n-кубитных стабилизаторных состояний (n <= 3)"""
    return _enumerate_stabilizers(2, n, MAX_QUBITS)


def stabilizer_states_qutrit(n: int) -> FreeSet:
    """Выпуклая оболочка n-кутритных стабилизаторных состояний (n <= 2)"""
    return _enumerate_stabilizers(3, n, MAX_QUTRITS)


def clifford_preparation(phi: MatrixLike, d: int, n: int) -> np.ndarray:
    """
    Клиффордов унитарный U с U|0...0> = e^{ia}|phi> (тот же обход орбиты).

    Raises:
        InvalidState: phi не стабилизаторное состояние
    """
    vec = phi.amplitudes if isinstance(phi, PureState) else np.asarray(phi, dtype=complex).reshape(-1)
    if vec.shape[0] != d ** n:
        raise DimensionMismatch(f"Размерность вектора {vec.shape[0]} != {d}^{n}")
    vectors, unitaries = _orbit(d, n, track=True)
    overlaps = np.abs(vectors.conj() @ vec) ** 2
    k = int(np.argmax(overlaps))
    if overlaps[k] < 1.0 - OVERLAP_DEDUP_TOL:
        raise InvalidState("Состояние не является стабилизаторным")
    return unitaries[k]


# ========== КОГЕРЕНТНОСТЬ И PPT ==========

def coherence_set(d: int) -> FreeSet:
    """Диагональные состояния как оболочка базисных проекторов"""
    if d < 2:
        raise OutOfRange(f"Размерность должна быть >= 2, получено {d}")
    vertices = np.stack([projector(np.eye(d)[k]) for k in range(d)]).astype(complex)
    return vertex_hull("coh", vertices, (d,), vectors=np.eye(d, dtype=complex))


def _cone_set(label: str, dims: Tuple[int, ...], rule: ConeRule, basis: np.ndarray) -> FreeSet:
    return FreeSet(label=label, kind=SetKind.SDP_CONE, dims=dims, affine_basis=basis,
                   rule=rule, full_dimensional=_is_full_dimensional(basis))


def ppt_set(d_a: int, d_b: int) -> FreeSet:
    """Состояния с положительным частичным транспонированием по второй подсистеме"""
    if d_a < 2 or d_b < 2:
        raise OutOfRange(f"Размерности должны быть >= 2, получено ({d_a}, {d_b})")
    dims = (int(d_a), int(d_b))
    return _cone_set("ppt", dims, ConeRule(ppt_dims=dims), traceless_basis(d_a * d_b))


def coherence_cone(d: int) -> FreeSet:
    """Диагональные состояния в форме SDP-конуса"""
    if d < 2:
        raise OutOfRange(f"Размерность должна быть >= 2, получено {d}")
    diagonal = traceless_basis(d)[: d - 1]
    return _cone_set("coh_cone", (d,), ConeRule(diagonal=True), diagonal)


def vertex_cone(free: FreeSet) -> FreeSet:
    """Та же оболочка вершин, записанная как конус с образующими"""
    if not free.is_hull:
        raise ValueError("vertex_cone ожидает множество VertexHull")
    return _cone_set(f"{free.label}_cone", free.dims, ConeRule(generators=free.vertices), free.affine_basis)


# ========== ПРИНАДЛЕЖНОСТЬ ==========

@dataclass
class MembershipResult:
    member: bool
    residual: float
    witness: Optional[np.ndarray] = None
    witness_bound: float = 0.0

    def __bool__(self) -> bool:
        return self.member


@dataclass
class VertexRobustness:
    """t = min sum a_i при sum a_i v_i >= rho, a >= 0; witness W и веса a из одного решения"""
    value: float
    witness: Optional[np.ndarray]
    weights: Optional[np.ndarray]
    solution: ModelSolution

    @property
    def status(self) -> SolutionStatus:
        return self.solution.status

    def sigma(self, vertices: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, vertices, axes=1)


def vertex_robustness(rho: np.ndarray, vertices: np.ndarray, label: str) -> VertexRobustness:
    """
    Робастность относительно конуса вершин через двойственную задачу

        max Tr[W rho]  при  W >= 0,  Tr[W v_i] <= 1.

    Переменная - только W (d^2 вещественных координат) при любом числе
    вершин. Веса a_i - множители строк Tr[W v_i] <= 1.
    """
    vertices = np.asarray(vertices, dtype=complex)
    model = ConicModel(label)
    w = model.hermitian(vertices.shape[1])
    model.add_psd(w)
    rows = [model.add_le(w.real_trace_with(v), 1.0) for v in vertices]
    model.maximize(w.real_trace_with(rho))
    result = model.solve()
    if result.status is not SolutionStatus.OPTIMAL:
        return VertexRobustness(value=result.value, witness=None, weights=None, solution=result)
    weights = np.clip(np.array([result.ineq_dual(k) for k in rows]), 0.0, None)
    return VertexRobustness(value=result.value, witness=w.evaluate(result.x), weights=weights, solution=result)


def _hull_membership(rho: np.ndarray, vertices: np.ndarray, label: str) -> MembershipResult:
    # rho в оболочке iff робастность равна 1
    robustness = vertex_robustness(rho, vertices, f"membership_{label}")
    if robustness.status is not SolutionStatus.OPTIMAL:
        logger.info(f"Проверка принадлежности ({label}): статус {robustness.status.value}")
        return MembershipResult(member=False, residual=math.inf)
    excess = robustness.value - 1.0
    if excess <= MEMBERSHIP_TOL:
        return MembershipResult(member=True, residual=max(excess, 0.0))
    # Tr[W v_i] <= 1 для всех вершин, Tr[W rho] = t > 1
    return MembershipResult(member=False, residual=excess, witness=robustness.witness, witness_bound=1.0)


def _cone_membership(rho: np.ndarray, free: FreeSet) -> MembershipResult:
    rule = free.rule
    if rule.generators is not None:
        return _hull_membership(rho, rule.generators, free.label)
    if rule.diagonal:
        off = rho - np.diag(np.diag(rho))
        k, l = np.unravel_index(int(np.argmax(np.abs(off))), off.shape)
        size = float(np.abs(off[k, l]))
        if size <= MEMBERSHIP_TOL:
            return MembershipResult(member=True, residual=size)
        phase = off[k, l] / size
        witness = np.zeros_like(rho)
        witness[l, k] = np.conj(phase)
        witness[k, l] = phase
        return MembershipResult(member=False, residual=size, witness=witness, witness_bound=0.0)
    pt = partial_transpose(rho, rule.ppt_dims, len(rule.ppt_dims) - 1)
    w, v = np.linalg.eigh(0.5 * (pt + pt.conj().T))
    if w[0] >= -MEMBERSHIP_TOL:
        return MembershipResult(member=True, residual=max(-float(w[0]), 0.0))
    witness = -partial_transpose(projector(v[:, 0]), rule.ppt_dims, len(rule.ppt_dims) - 1)
    return MembershipResult(member=False, residual=-float(w[0]), witness=witness, witness_bound=0.0)


def membership(rho: MatrixLike, free: FreeSet) -> MembershipResult:
    """
    Проверка rho in F.

    При отрицательном ответе witness W разделяет: Tr[W rho] > witness_bound >= max_F Tr[W sigma].
    """
    mat = as_array(rho)
    if mat.shape[0] != free.dim:
        raise DimensionMismatch(f"Размерность состояния {mat.shape[0]} != размерности множества {free.dim}")
    if free.is_hull:
        return _hull_membership(mat, free.vertices, free.label)
    return _cone_membership(mat, free)


# ========== КАТАЛОГ СОСТОЯНИЙ ==========

def _qubit_face() -> np.ndarray:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    rho = 0.5 * (np.eye(2) + (x + y + z) / math.sqrt(3.0))
    _, vecs = np.linalg.eigh(rho)
    return vecs[:, -1]


def _catalog_vectors() -> Dict[str, Tuple[np.ndarray, Tuple[int, ...]]]:
    w9 = np.exp(2j * np.pi / 9)
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    toffoli_input = kron(plus, plus, np.array([1.0, 0.0]))
    toffoli = np.eye(8, dtype=complex)
    toffoli[6:, 6:] = [[0, 1], [1, 0]]
    return {
        "face": (_qubit_face(), (2,)),
        "hoggar": (np.array([1 + 1j, 0, -1, 1, -1j, -1, 0, 0], dtype=complex), (2, 2, 2)),
        "strange": (np.array([0, 1, -1], dtype=complex), (3,)),
        "norrell": (np.array([-1, 2, -1], dtype=complex), (3,)),
        "t_qutrit": (np.array([w9, 1, np.conj(w9)], dtype=complex), (3,)),
        "t_qubit": (np.array([1, np.exp(1j * np.pi / 4)], dtype=complex), (2,)),
        "toffoli": (toffoli @ toffoli_input.reshape(-1), (2, 2, 2)),
        "plus": (plus, (2,)),
        "zero": (np.array([1, 0], dtype=complex), (2,)),
    }


CATALOG_LABELS = ("face", "hoggar", "strange", "norrell", "t_qutrit", "t_qubit", "toffoli",
                  "plus", "zero", "bell(m)", "max_coherent(m)", "strange_perp", "t_qutrit_perp")
_FAMILY_RE = re.compile(r"^(bell|max_coherent)\(?(\d+)\)?$")


def named_pure_state(label: str) -> PureState:
    """Чистое состояние каталога; метка "x^2" даёт две копии"""
    label = label.strip().lower()
    if label.endswith("^2"):
        single = named_pure_state(label[:-2])
        return PureState(np.kron(single.amplitudes, single.amplitudes), single.dims + single.dims)
    family = _FAMILY_RE.match(label)
    if family:
        name, m = family.group(1), int(family.group(2))
        if m < 2:
            raise OutOfRange(f"{name}: m должно быть >= 2, получено {m}")
        if name == "bell":
            vec = np.eye(m, dtype=complex).reshape(-1)
            return PureState.normalized(vec, (m, m))
        return PureState.normalized(np.ones(m, dtype=complex), (m,))
    catalog = _catalog_vectors()
    if label not in catalog:
        raise UnknownLabel(f"Неизвестная метка состояния: {label!r}")
    vec, dims = catalog[label]
    return PureState.normalized(vec, dims)


def named_state(label: str) -> DensityMatrix:
    """
    Состояние каталога как матрица плотности.

    Помимо чистых состояний доступны strange_perp = (I - S)/2 и
    t_qutrit_perp = (I - T)/2.
    """
    key = label.strip().lower()
    if key in ("strange_perp", "t_qutrit_perp"):
        base = named_pure_state(key[: -len("_perp")]).density()
        return DensityMatrix((np.eye(3) - base.matrix) / 2.0, (3,))
    return named_pure_state(key).density()


def isotropic(phi: MatrixLike, sigma_star: MatrixLike, kappa: float) -> DensityMatrix:
    """Phi_kappa = kappa Phi + (1 - kappa) sigma*"""
    if not 0.0 <= kappa <= 1.0:
        raise OutOfRange(f"kappa = {kappa} вне [0, 1]")
    phi_d, sigma_d = as_density(phi), as_density(sigma_star)
    if phi_d.dim != sigma_d.dim:
        raise DimensionMismatch(f"Размерности {phi_d.dim} и {sigma_d.dim} не совпадают")
    overlap = float(np.real(np.trace(phi_d.matrix @ sigma_d.matrix)))
    if overlap > 1e-8:
        raise NotOrthogonal(f"Tr[Phi sigma*] = {overlap:.3e} > 1e-8")
    return DensityMatrix(kappa * phi_d.matrix + (1.0 - kappa) * sigma_d.matrix, phi_d.dims)


def isotropic_family(label: str) -> Tuple[DensityMatrix, DensityMatrix]:
    """(Phi, sigma*) для семейств strange и norrell: sigma* = (I - Phi)/2"""
    phi = named_state(label)
    if phi.dim != 3:
        raise UnknownLabel(f"Изотропное семейство определено для кутритных состояний, получено {label!r}")
    sigma = DensityMatrix((np.eye(3) - phi.matrix) / 2.0, (3,))
    return phi, sigma


# ========== РЕЕСТР МНОЖЕСТВ ==========

SET_KINDS = ("stab", "stab3", "coh", "ppt")


class FreeSetRegistry:
    """Кэш построенных множеств: перечисление 1080/360 вершин выполняется один раз"""

    def __init__(self, maxsize: Optional[int] = None):
        self._cache = LRUCache(maxsize=maxsize or config.SET_CACHE_SIZE)
        logger.debug(f"Инициализирован FreeSetRegistry, размер кэша {self._cache.maxsize}")

    def _get_cached(self, key: Tuple) -> Optional[FreeSet]:
        if key in self._cache:
            logger.debug(f"Множество {key} взято из кэша")
            return self._cache[key]
        return None

    def _set_cached(self, key: Tuple, value: FreeSet):
        self._cache[key] = value

    def get(self, kind: str, dims: Sequence[int]) -> FreeSet:
        dims = tuple(int(d) for d in dims)
        key = (kind, dims)
        cached = self._get_cached(key)
        if cached is not None:
            return cached
        free = self._build(kind, dims)
        self._set_cached(key, free)
        return free

    @staticmethod
    def _build(kind: str, dims: Tuple[int, ...]) -> FreeSet:
        if kind == "stab":
            if all(d == 2 for d in dims):
                return stabilizer_states(len(dims))
            if all(d == 3 for d in dims):
                return stabilizer_states_qutrit(len(dims))
            raise DimensionMismatch(f"stab требует кубитных или кутритных подсистем, получено {dims}")
        if kind == "stab3":
            if not all(d == 3 for d in dims):
                raise DimensionMismatch(f"stab3 требует кутритных подсистем, получено {dims}")
            return stabilizer_states_qutrit(len(dims))
        if kind == "coh":
            return coherence_set(int(np.prod(dims)))
        if kind == "ppt":
            if len(dims) != 2:
                raise DimensionMismatch(f"ppt требует двудольной системы, получено {dims}")
            return ppt_set(*dims)
        raise UnknownLabel(f"Неизвестное свободное множество: {kind!r}")

    def clear(self):
        self._cache.clear()
        logger.info("Кэш множеств очищен")

    def __len__(self) -> int:
        return len(self._cache)


_registry: Optional[FreeSetRegistry] = None


def free_set_for(kind: str, dims: Sequence[int]) -> FreeSet:
    global _registry
    if _registry is None:
        _registry = FreeSetRegistry()
    return _registry.get(kind, dims)
