"""
Твирлинг-каналы: измерить-и-приготовить Lambda(rho) = Tr[P* rho] Phi + Tr[(I - P*) rho] sigma*,
усреднения по конечным ансамблям унитарных, замыкания групп и проверка
свободности каналов на свободном множестве.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from src import config
from src.errors import (
    CatalogMiss,
    DimensionMismatch,
    NoComplement,
    NonHermitian,
    NotEigenvector,
    OutOfRange,
    PreconditionFailed,
)
from src.managers import measures
from src.managers.resource_sets import (
    FreeSet,
    MembershipResult,
    clifford_preparation,
    isotropic_family,
    membership,
    named_pure_state,
    single_qudit_cliffords,
)
from src.utils.linalg import (
    DensityMatrix,
    MatrixLike,
    PureState,
    as_array,
    as_density,
    dagger,
    herm_eig,
    is_unitary,
    kron,
    projector,
    qudit_clock,
    random_pure_state,
    weyl_operator,
)
from src.utils.state_io import EnsembleFile, encode_matrix, parse_ensemble

logger = logging.getLogger(__name__)

CHANNEL_TOL = 1e-8
COLLAPSE_TOL = 1e-5
PROJECTOR_TOL = 1e-6
PHASE_DEDUP_DIGITS = 8
EIGEN_TOL = 1e-8
ALPHA_DIGITS = 9
DEFAULT_SAMPLE = 24

ChannelLike = Union["TwirlChannel", "UnitaryEnsemble", Callable[[np.ndarray], np.ndarray]]


# ========== КАНАЛ ИЗМЕРИТЬ-И-ПРИГОТОВИТЬ ==========

@dataclass(frozen=True, eq=False)
class TwirlChannel:
    """Lambda(rho) = Tr[P* rho] Phi + Tr[(I - P*) rho] sigma*"""
    p_star: np.ndarray
    phi: DensityMatrix
    sigma_star: DensityMatrix

    def __post_init__(self):
        p = np.asarray(self.p_star, dtype=complex)
        if p.shape != (self.phi.dim, self.phi.dim) or self.sigma_star.dim != self.phi.dim:
            raise DimensionMismatch("P*, Phi и sigma* должны иметь одну размерность")
        if not np.allclose(p, dagger(p), atol=1e-10):
            raise NonHermitian("P* не эрмитов")
        eig = np.linalg.eigvalsh(p)
        if eig[0] < -CHANNEL_TOL or eig[-1] > 1.0 + CHANNEL_TOL:
            raise PreconditionFailed(f"Спектр P* вне [0, 1]: [{eig[0]:.3e}, {eig[-1]:.3e}]")
        if self.phi.expectation(p) < 1.0 - CHANNEL_TOL:
            raise PreconditionFailed(f"Tr[P* Phi] = {self.phi.expectation(p):.3e} < 1")
        if self.sigma_star.expectation(p) > CHANNEL_TOL:
            raise PreconditionFailed(f"Tr[P* sigma*] = {self.sigma_star.expectation(p):.3e} > 0")
        if self.sigma_star.expectation(self.phi.matrix) > CHANNEL_TOL:
            raise PreconditionFailed("sigma* не ортогонально Phi")
        object.__setattr__(self, "p_star", 0.5 * (p + dagger(p)))

    @property
    def dim(self) -> int:
        return self.phi.dim

    def __call__(self, rho: MatrixLike) -> np.ndarray:
        mat = as_array(rho)
        if mat.shape[0] != self.dim:
            raise DimensionMismatch(f"Размерность входа {mat.shape[0]} != {self.dim}")
        alpha = np.trace(self.p_star @ mat)
        return alpha * self.phi.matrix + (np.trace(mat) - alpha) * self.sigma_star.matrix


def apply_channel(channel: TwirlChannel, rho: MatrixLike) -> DensityMatrix:
    state = as_density(rho)
    return DensityMatrix(channel(state.matrix), channel.phi.dims)


def _kernel_projector(effect: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    w, v = herm_eig(effect)
    kernel = v[:, w <= tol]
    return kernel @ dagger(kernel)


def _orthogonal_complement_state(sigma: DensityMatrix, effect: np.ndarray) -> DensityMatrix:
    """Сжатие sigma на ядро P*; снимает численный хвост Tr[P* sigma] ~ 1e-9"""
    leak = sigma.expectation(effect)
    if leak > COLLAPSE_TOL:
        raise PreconditionFailed(f"Дополнение робастности не ортогонально тесту: Tr[P* sigma*] = {leak:.3e}")
    k = _kernel_projector(effect)
    squeezed = k @ sigma.matrix @ k
    trace = float(np.real(np.trace(squeezed)))
    if trace <= 0.5:
        raise PreconditionFailed("Дополнение робастности вырождено на ядре P*")
    return DensityMatrix(squeezed / trace, sigma.dims)


def _snap_projector(effect: np.ndarray) -> np.ndarray:
    """Спектр в пределах PROJECTOR_TOL от {0, 1} округляется до точного проектора"""
    w, v = herm_eig(effect)
    snapped = np.round(w)
    if np.max(np.abs(w - snapped)) > PROJECTOR_TOL or np.any((snapped < 0.0) | (snapped > 1.0)):
        return effect
    image = v[:, snapped == 1.0]
    return image @ dagger(image)


def _flat_complement(state: DensityMatrix, effect: np.ndarray, alpha_max: float,
                     free: FreeSet) -> Optional[DensityMatrix]:
    """
    K / Tr K на ядре P*, если канал с ним свободен.

    Образы свободных состояний лежат на отрезке от sigma* до
    alpha_max Phi + (1 - alpha_max) sigma*, alpha_max = max Tr[P* sigma] по F,
    поэтому достаточно проверить оба конца.
    """
    k = _kernel_projector(effect)
    rank = float(np.real(np.trace(k)))
    if rank < 0.5:
        return None
    flat = k / rank
    far_end = alpha_max * state.matrix + (1.0 - alpha_max) * flat
    if not (membership(flat, free).member and membership(far_end, free).member):
        logger.debug(f"Плоское дополнение на ядре P* не свободно на {free.label}")
        return None
    return DensityMatrix(flat, state.dims)


def build_lemma3_channel(phi: MatrixLike, free: FreeSet) -> TwirlChannel:
    """
    Канал измерить-и-приготовить, стабилизирующий Phi.

    Полная размерность: D_min = D_s, P* - проектор на носитель Phi,
    sigma* - дополнение из решения D_s. Неполная: D_min,aff = D_max,
    P* - оптимальный тест D_min,aff, sigma* - дополнение из D_max.
    Почти проекторный P* округляется до точного проектора; если канал с
    плоским состоянием на ядре P* свободен, sigma* берётся плоским.

    Raises:
        PreconditionFailed: меры не совпадают или Phi свободно
    """
    state = as_density(phi, free.dims)
    if free.full_dimensional:
        lower, upper = measures.d_min(state, free), measures.d_s(state, free)
    else:
        lower, upper = measures.d_min_aff(state, free), measures.d_max(state, free)
    effect = lower.witness_operator
    if abs(lower.bits - upper.bits) > COLLAPSE_TOL:
        logger.error(f"❌ {lower.measure}={lower.bits:.6f} != {upper.measure}={upper.bits:.6f} на {free.label}")
        raise PreconditionFailed(
            f"Меры не совпадают: {lower.measure}={lower.bits:.9f}, {upper.measure}={upper.bits:.9f}")
    try:
        complement = measures.robustness_complement(upper)
    except NoComplement as e:
        raise PreconditionFailed(f"Phi свободно на {free.label}: канал не нужен") from e
    effect = _snap_projector(0.5 * (effect + dagger(effect)))
    sigma_star = _orthogonal_complement_state(complement, effect)
    if free.is_hull:
        alpha_max = float(np.max(np.real(np.einsum("ij,kji->k", effect, free.vertices))))
    else:
        alpha_max = 2.0 ** -lower.bits if free.full_dimensional else None
    flat = _flat_complement(state, effect, alpha_max, free) if alpha_max is not None else None
    if flat is not None:
        sigma_star = flat
    logger.info(f"✅ Канал измерить-и-приготовить построен на {free.label}, r = {upper.bits:.6f}")
    return TwirlChannel(p_star=effect, phi=state, sigma_star=sigma_star)


def measure_prepare_map(label: str = "strange") -> TwirlChannel:
    """Явный канал Tr[Phi rho] Phi + Tr[(I - Phi) rho] (I - Phi)/2 для семейств strange и norrell"""
    phi, sigma = isotropic_family(label)
    return TwirlChannel(p_star=phi.matrix.copy(), phi=phi, sigma_star=sigma)


# ========== АНСАМБЛИ УНИТАРНЫХ ==========

@dataclass(frozen=True, eq=False)
class UnitaryEnsemble:
    unitaries: Tuple[np.ndarray, ...]
    weights: Tuple[float, ...]
    dims: Tuple[int, ...] = ()
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.unitaries:
            raise OutOfRange("Ансамбль пуст")
        mats = tuple(np.asarray(u, dtype=complex) for u in self.unitaries)
        d = mats[0].shape[0]
        for u in mats:
            if u.shape != (d, d):
                raise DimensionMismatch(f"Унитарные разной размерности: {u.shape} и {(d, d)}")
            if not is_unitary(u):
                raise OutOfRange("Элемент ансамбля не унитарен")
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(mats):
            raise DimensionMismatch("Число весов не совпадает с числом унитарных")
        if any(w < 0 for w in weights) or not math.isclose(sum(weights), 1.0, abs_tol=1e-10):
            raise OutOfRange(f"Веса должны быть распределением, сумма {sum(weights)}")
        dims = tuple(self.dims) if self.dims else (d,)
        if int(np.prod(dims)) != d:
            raise DimensionMismatch(f"Произведение dims {dims} != {d}")
        object.__setattr__(self, "unitaries", mats)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def uniform(cls, unitaries: Sequence[np.ndarray], dims: Sequence[int] = (),
                labels: Sequence[str] = ()) -> "UnitaryEnsemble":
        n = len(unitaries)
        return cls(tuple(unitaries), tuple([1.0 / n] * n), tuple(dims), tuple(labels))

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def __len__(self) -> int:
        return len(self.unitaries)

    def __call__(self, rho: MatrixLike) -> np.ndarray:
        mat = as_array(rho)
        if mat.shape[0] != self.dim:
            raise DimensionMismatch(f"Размерность входа {mat.shape[0]} != {self.dim}")
        stack = np.array(self.unitaries)
        conj = stack @ mat @ np.conj(np.transpose(stack, (0, 2, 1)))
        return np.tensordot(np.array(self.weights), conj, axes=1)

    # ---------- JSON ----------

    def to_file_model(self) -> EnsembleFile:
        return EnsembleFile(dims=list(self.dims), unitaries=[encode_matrix(u) for u in self.unitaries],
                            weights=list(self.weights))

    def to_json(self) -> str:
        return self.to_file_model().model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "UnitaryEnsemble":
        model = parse_ensemble(text)
        return cls(tuple(model.matrices()), tuple(model.weights), tuple(model.dims))


def export_ensemble(ensemble: UnitaryEnsemble, path: Union[str, Path]) -> None:
    Path(path).write_text(ensemble.to_json(), encoding="utf-8")
    logger.info(f"Ансамбль из {len(ensemble)} унитарных записан в {path}")


def load_ensemble(path: Union[str, Path]) -> UnitaryEnsemble:
    return UnitaryEnsemble.from_json(Path(path).read_text(encoding="utf-8"))


def twirl_average(ensemble: UnitaryEnsemble, rho: MatrixLike) -> DensityMatrix:
    """sum_g w_g U_g rho U_g^+"""
    state = as_density(rho, ensemble.dims)
    dims = state.dims if len(state.dims) > 1 else ensemble.dims
    return DensityMatrix(ensemble(state.matrix), dims)


def ensemble_tensor(first: UnitaryEnsemble, second: UnitaryEnsemble) -> UnitaryEnsemble:
    """Ансамбль произведений U_a (x) V_b с весами w_a w_b"""
    pairs = list(itertools.product(range(len(first)), range(len(second))))
    return UnitaryEnsemble(
        unitaries=tuple(np.kron(first.unitaries[a], second.unitaries[b]) for a, b in pairs),
        weights=tuple(first.weights[a] * second.weights[b] for a, b in pairs),
        dims=first.dims + second.dims,
    )


def channel_compose(*channels: ChannelLike) -> Callable[[MatrixLike], np.ndarray]:
    """Композиция каналов: первый аргумент применяется первым"""
    def composed(rho: MatrixLike) -> np.ndarray:
        mat = as_array(rho)
        for channel in channels:
            mat = channel(mat)
        return mat
    return composed


# ========== ЗАМЫКАНИЕ ГРУППЫ ==========

@dataclass
class GroupClosure:
    elements: List[np.ndarray]
    generator_labels: Tuple[str, ...] = ()
    capped: bool = False

    @property
    def order(self) -> int:
        return len(self.elements)

    def as_ensemble(self, dims: Sequence[int] = ()) -> UnitaryEnsemble:
        return UnitaryEnsemble.uniform(self.elements, dims)


def phase_key(u: np.ndarray) -> bytes:
    """
    Ключ унитарного с точностью до глобальной фазы.

    Первый элемент модуля не меньше (1 - 1e-6) max|u_ij| поворачивается
    на положительную вещественную ось, затем округление до 1e-8.
    """
    flat = np.asarray(u, dtype=complex).ravel()
    mags = np.abs(flat)
    idx = int(np.argmax(mags >= mags.max() * (1.0 - 1e-6)))
    canon = flat * (np.conj(flat[idx]) / mags[idx])
    parts = np.round(np.concatenate([canon.real, canon.imag]), PHASE_DEDUP_DIGITS) + 0.0
    return parts.tobytes()


def group_closure(generators: Sequence[np.ndarray], cap: Optional[int] = None,
                  labels: Sequence[str] = ()) -> GroupClosure:
    """
    Обход в ширину по произведениям с генераторами, дубликаты по модулю фазы.

    При достижении cap возвращает частичное замыкание с capped=True.
    """
    cap = config.GROUP_CAP if cap is None else cap
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if not gens:
        raise OutOfRange("Нужен хотя бы один генератор")
    for g in gens:
        if not is_unitary(g):
            raise OutOfRange("Генератор не унитарен")
    d = gens[0].shape[0]
    identity = np.eye(d, dtype=complex)
    seen = {phase_key(identity)}
    elements = [identity]
    frontier = [identity]
    while frontier:
        fresh = []
        for element in frontier:
            for g in gens:
                product = g @ element
                key = phase_key(product)
                if key in seen:
                    continue
                if len(elements) >= cap:
                    logger.warning(f"⚠️ Замыкание группы остановлено на пределе {cap} элементов")
                    return GroupClosure(elements, tuple(labels), capped=True)
                seen.add(key)
                elements.append(product)
                fresh.append(product)
        frontier = fresh
        logger.debug(f"Замыкание группы: слой +{len(fresh)}, всего {len(elements)}")
    logger.info(f"Замыкание группы: {len(elements)} элементов по модулю фазы")
    return GroupClosure(elements, tuple(labels), capped=False)


def eigenvector_uniqueness(group: Union[UnitaryEnsemble, GroupClosure, Sequence[np.ndarray]],
                           phi: Union[PureState, np.ndarray]) -> bool:
    """
    True, если Phi - единственный (до скаляра) общий собственный вектор.

    Собственные подпространства при фазах, извлечённых из Phi, пересекаются
    последовательными проекциями; ответ - размерность пересечения 1.

    Raises:
        NotEigenvector: какой-то элемент сдвигает Phi сильнее 1e-8
    """
    if isinstance(group, UnitaryEnsemble):
        unitaries = list(group.unitaries)
    elif isinstance(group, GroupClosure):
        unitaries = group.elements
    else:
        unitaries = [np.asarray(u, dtype=complex) for u in group]
    vec = phi.amplitudes if isinstance(phi, PureState) else np.asarray(phi, dtype=complex).reshape(-1)
    vec = vec / np.linalg.norm(vec)
    d = vec.shape[0]
    basis = np.eye(d, dtype=complex)
    for u in unitaries:
        if u.shape != (d, d):
            raise DimensionMismatch(f"Размерность элемента {u.shape} != {d}")
        image = u @ vec
        phase = np.vdot(vec, image)
        if np.linalg.norm(image - phase * vec) > EIGEN_TOL:
            raise NotEigenvector(f"Элемент группы сдвигает Phi на {np.linalg.norm(image - phase * vec):.3e}")
        restricted = (u - phase * np.eye(d)) @ basis
        null = scipy.linalg.null_space(restricted, rcond=EIGEN_TOL)
        basis = basis @ null
        basis, _ = np.linalg.qr(basis)
        if basis.shape[1] == 1:
            return True
    return basis.shape[1] == 1


# ========== ПРОВЕРКА СВОБОДНОСТИ ==========

@dataclass
class FreenessReport:
    free: bool
    worst_violation: float
    confidence: str  # "Exact" | "Sampled"
    checked: int
    violations: List[int] = field(default_factory=list)


def _permutes_vertices(ensemble: UnitaryEnsemble, free: FreeSet) -> bool:
    vectors = free.vectors
    for u in ensemble.unitaries:
        images = vectors @ u.T
        overlaps = np.abs(vectors.conj() @ images.T) ** 2
        if overlaps.max(axis=0).min() < 1.0 - CHANNEL_TOL:
            return False
    return True


def _membership_images(images: List[np.ndarray], free: FreeSet) -> Tuple[List[MembershipResult], List[int]]:
    """Принадлежность образов с отсевом совпадающих матриц"""
    results: Dict[bytes, MembershipResult] = {}
    verdicts = []
    for image in images:
        key = (np.round(np.concatenate([image.real.ravel(), image.imag.ravel()]), ALPHA_DIGITS) + 0.0).tobytes()
        if key not in results:
            results[key] = membership(0.5 * (image + dagger(image)), free)
        verdicts.append(results[key])
    bad = [i for i, r in enumerate(verdicts) if not r.member]
    return verdicts, bad


def _cone_sample(free: FreeSet, count: int) -> List[np.ndarray]:
    """Детерминированная выборка: базисные или порождающие состояния, произведения случайных чистых и I/d"""
    d = free.dim
    sample = [np.eye(d, dtype=complex) / d]
    rule = free.rule
    if rule.generators is not None:
        sample.extend(rule.generators)
        return sample
    if rule.diagonal:
        sample.extend(projector(np.eye(d, dtype=complex)[j]) for j in range(d))
        return sample
    rng = np.random.default_rng(config.RANDOM_SEED)
    for _ in range(count):
        parts = [random_pure_state(k, rng) for k in free.dims]
        sample.append(projector(kron(*parts).reshape(-1)))
    return sample


def verify_free(channel: ChannelLike, free: FreeSet, sample_size: int = DEFAULT_SAMPLE) -> FreenessReport:
    """
    Проверка Lambda(F) subset F.

    Для оболочки вершин достаточно образов вершин (выпуклость), ответ Exact.
    Для канала измерить-и-приготовить образ вершины зависит только от
    alpha = Tr[P* v], поэтому проверяются различные значения alpha.
    Для SDP-конуса проверяется выборка, ответ Sampled.
    """
    if not free.is_hull:
        images = [channel(s) for s in _cone_sample(free, sample_size)]
        verdicts, bad = _membership_images(images, free)
        worst = max((verdicts[i].residual for i in bad), default=0.0)
        return FreenessReport(free=not bad, worst_violation=worst, confidence="Sampled",
                              checked=len(images), violations=bad)

    if isinstance(channel, UnitaryEnsemble) and free.vectors is not None and _permutes_vertices(channel, free):
        logger.debug(f"Все {len(channel)} унитарных переставляют вершины {free.label}")
        return FreenessReport(free=True, worst_violation=0.0, confidence="Exact", checked=free.vertex_count)

    if isinstance(channel, TwirlChannel):
        alphas = np.round(np.real(np.einsum("ij,kji->k", channel.p_star, free.vertices)), ALPHA_DIGITS)
        distinct = sorted(set(alphas.tolist()))
        images = [a * channel.phi.matrix + (1.0 - a) * channel.sigma_star.matrix for a in distinct]
        verdicts, bad = _membership_images(images, free)
        worst = max((verdicts[i].residual for i in bad), default=0.0)
        # индексы вершин, а не номера различных alpha
        bad_alphas = [distinct[i] for i in bad]
        violations = [k for k in range(free.vertex_count) if alphas[k] in bad_alphas]
        logger.debug(f"Проверка канала: {len(distinct)} различных alpha на {free.vertex_count} вершинах")
        return FreenessReport(free=not bad, worst_violation=worst, confidence="Exact",
                              checked=free.vertex_count, violations=violations)

    images = [channel(v) for v in free.vertices]
    verdicts, bad = _membership_images(images, free)
    worst = max((verdicts[i].residual for i in bad), default=0.0)
    if bad:
        logger.warning(f"⚠️ Канал выводит {len(bad)} вершин из {free.label}, худшее нарушение {worst:.3e}")
    return FreenessReport(free=not bad, worst_violation=worst, confidence="Exact",
                          checked=len(images), violations=bad)


# ========== КАТАЛОГ АНСАМБЛЕЙ ==========

def face_ensemble() -> UnitaryEnsemble:
    """{I, K, K^2}, K = SH циклически переставляет оси X -> Z -> Y"""
    gates = single_qudit_cliffords(2)
    k = gates["S"] @ gates["H"]
    return UnitaryEnsemble.uniform([np.eye(2, dtype=complex), k, k @ k], (2,), ("I", "K", "K2"))


def sl2z3_generators() -> Dict[str, np.ndarray]:
    """Фурье F и квадратичная фаза diag(1, w^2, w^2); оба сохраняют состояние Strange"""
    omega = np.exp(2j * np.pi / 3)
    return {
        "F": single_qudit_cliffords(3)["F"],
        "P": np.diag([1.0, omega ** 2, omega ** 2]).astype(complex),
    }


def sl2z3_ensemble() -> UnitaryEnsemble:
    gens = sl2z3_generators()
    closure = group_closure(list(gens.values()), labels=tuple(gens))
    return closure.as_ensemble((3,))


def hoggar_generators() -> Dict[str, np.ndarray]:
    """Клиффордовы унитарные порядков 7 и 12, оставляющие |Hog> на месте"""
    w = np.exp(2j * np.pi / 8)
    i = 1j
    u7 = np.array([
        [0, 0, 1, 0, -i, 0, 0, 0],
        [0, 0, i, 0, -1, 0, 0, 0],
        [0, 0, 0, -i, 0, -1, 0, 0],
        [0, 0, 0, -1, 0, -i, 0, 0],
        [1, 0, 0, 0, 0, 0, -i, 0],
        [-i, 0, 0, 0, 0, 0, 1, 0],
        [0, -i, 0, 0, 0, 0, 0, -1],
        [0, 1, 0, 0, 0, 0, 0, i],
    ], dtype=complex) * w ** 5 / math.sqrt(2.0)
    u12 = np.array([
        [0, 0, 0, 0, 1, i, 0, 0],
        [0, 0, 0, 0, -1, i, 0, 0],
        [1, -i, 0, 0, 0, 0, 0, 0],
        [-1, -i, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, i, 0, 0, 0, 0],
        [0, 0, -1, i, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, -i],
        [0, 0, 0, 0, 0, 0, -1, -i],
    ], dtype=complex) * w ** 3 / math.sqrt(2.0)
    return {"U7": u7, "U12": u12}


def hoggar_closure(cap: Optional[int] = None) -> GroupClosure:
    gens = hoggar_generators()
    return group_closure(list(gens.values()), cap=cap, labels=tuple(gens))


def strange_sic_projectors() -> np.ndarray:
    """psi_k = D_k S D_k^+ для k = (k1, k2) в порядке k1 * 3 + k2; psi_0 = S"""
    s = named_pure_state("strange").density().matrix
    out = []
    for k1, k2 in itertools.product(range(3), range(3)):
        dk = weyl_operator(3, k1, k2)
        out.append(dk @ s @ dagger(dk))
    return np.array(out)


# ========== ДЕФАЗИРОВКА ДЛЯ МАГИИ КЛИФФОРДА ==========

def _third_level_catalog() -> Dict[str, Tuple[np.ndarray, int, int]]:
    """V третьего уровня иерархии Клиффорда: (матрица, d, число подсистем)"""
    w9 = np.exp(2j * np.pi / 9)
    toffoli = np.eye(8, dtype=complex)
    toffoli[6:, 6:] = [[0, 1], [1, 0]]
    return {
        "t_qubit": (np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(complex), 2, 1),
        "t_qutrit": (np.diag([w9, 1.0, np.conj(w9)]).astype(complex), 3, 1),
        "toffoli": (toffoli, 2, 3),
    }


def clifford_magic_dephasing(v_label: str, phi: Union[PureState, np.ndarray, None] = None) -> UnitaryEnsemble:
    """
    Ансамбль {prod_k W_{j_k k}}, W_{jk} = (VU) Z_k^j (VU)^+, U|0...0> ~ |phi>.

    Равномерное среднее дефазирует в базисе VU|z> и стабилизирует V|phi>.
    Без phi берётся |+...+> (для Тоффоли |++0>).

    Raises:
        CatalogMiss: V нет в каталоге
    """
    catalog = _third_level_catalog()
    if v_label not in catalog:
        raise CatalogMiss(f"Нет унитарного третьего уровня с меткой {v_label!r}; доступны {sorted(catalog)}")
    v, d, t = catalog[v_label]
    if phi is None:
        plus = np.ones(d, dtype=complex) / math.sqrt(d)
        sites = [plus] * t if v_label != "toffoli" else [plus, plus, np.array([1.0, 0.0], dtype=complex)]
        vec = kron(*sites).reshape(-1)
    else:
        vec = phi.amplitudes if isinstance(phi, PureState) else np.asarray(phi, dtype=complex).reshape(-1)
    u = clifford_preparation(vec, d, t)
    frame = v @ u
    clock = qudit_clock(d)
    identity = np.eye(d, dtype=complex)
    members, labels = [], []
    for powers in itertools.product(range(d), repeat=t):
        z = kron(*[np.linalg.matrix_power(clock, j) if j else identity for j in powers])
        members.append(frame @ z @ dagger(frame))
        labels.append("".join(str(j) for j in powers))
    dims = (d,) * t
    logger.info(f"Дефазировка для {v_label}: {len(members)} унитарных")
    return UnitaryEnsemble.uniform(members, dims, labels)
