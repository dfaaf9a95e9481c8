"""
Ресурсные меры состояний относительно свободного множества F.

Каждая мера сводится к LP или SDP над конусом cone(F): для оболочки вершин
это неотрицательные комбинации вершин, для SDP-конуса - эрмитова
переменная с правилами конуса. Все значения в битах.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.errors import (
    DimensionMismatch,
    EmptyLadder,
    EmptySet,
    NoComplement,
    NumericalBreakdown,
    OutOfRange,
    SolverFailure,
    Unbounded,
)
from src.managers.resource_sets import FreeSet, vertex_robustness
from src.services.conic_model import AffineMatrix, ConicModel, ModelSolution
from src.services.convex import LinearProgram, SolutionStatus, solve_lp
from src.utils.linalg import (
    DensityMatrix,
    MatrixLike,
    as_array,
    as_density,
    from_real_coordinates,
    herm_eig,
    pauli_group,
    projector,
    support_projector,
    to_real_coordinates,
)

logger = logging.getLogger(__name__)

CONTAINED_TOL = 1e-7
COMPLEMENT_TOL = 1e-7
LADDER_SLACK = 1e-6


class MeasureStatus(Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    CONTAINED = "Contained"


@dataclass
class MeasureValue:
    bits: float
    status: MeasureStatus = MeasureStatus.FINITE
    measure: str = ""
    witness_state: Optional[DensityMatrix] = None
    witness_operator: Optional[np.ndarray] = None
    complement: Optional[DensityMatrix] = None
    dual_gap: float = math.nan
    iterations: int = 0

    @property
    def is_finite(self) -> bool:
        return self.status is not MeasureStatus.INFINITE

    @classmethod
    def infinite(cls, measure: str, **kwargs) -> "MeasureValue":
        return cls(bits=math.inf, status=MeasureStatus.INFINITE, measure=measure, **kwargs)

    def summary(self) -> dict:
        return {
            "measure": self.measure,
            "bits": self.bits,
            "status": self.status.value,
            "dual_gap": self.dual_gap,
        }


@dataclass
class FidelityPair:
    primal: float
    dual: float

    @property
    def gap(self) -> float:
        return abs(self.primal - self.dual)


def robustness_complement(value: MeasureValue) -> DensityMatrix:
    """sigma* из решения d_max или d_s"""
    if value.complement is None:
        raise NoComplement(f"{value.measure}: робастность равна нулю, дополнение не определено")
    return value.complement


# ========== ВСПОМОГАТЕЛЬНЫЕ ==========

def _clean_bits(bits: float) -> float:
    if -CONTAINED_TOL < bits < 0.0:
        return 0.0
    return bits


def _to_state(mat: np.ndarray, dims) -> Optional[DensityMatrix]:
    """Проекция численного ответа на матрицы плотности (эрмитизация, отсечение и нормировка)"""
    mat = 0.5 * (mat + mat.conj().T)
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    total = float(w.sum())
    if total <= 1e-12:
        return None
    return DensityMatrix((v * (w / total)) @ v.conj().T, dims)


def _prepare(rho: MatrixLike, free: FreeSet) -> DensityMatrix:
    state = as_density(rho, free.dims)
    if state.dim != free.dim:
        raise DimensionMismatch(f"Размерность состояния {state.dim} != размерности множества {free.dim}")
    if free.is_hull and free.vertex_count == 0:
        raise EmptySet(f"Множество {free.label} не содержит вершин")
    return state


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 <= eps < 1.0:
        raise OutOfRange(f"eps = {eps} вне [0, 1)")
    return eps


def _require_optimal(result: ModelSolution, what: str) -> None:
    if result.status is not SolutionStatus.OPTIMAL:
        logger.error(f"❌ {what}: решатель вернул {result.status.value}")
        raise SolverFailure(f"{what}: статус {result.status.value}", result.status)


def _generators(free: FreeSet) -> Optional[np.ndarray]:
    """Вершины оболочки или образующие конуса; None для прочих SDP-конусов"""
    if free.is_hull:
        return free.vertices
    return free.rule.generators


def free_cone_expression(model: ConicModel, free: FreeSet) -> AffineMatrix:
    """Переменная sigma~ из cone(F)"""
    if free.is_hull:
        a = model.nonneg_vector(free.vertex_count)
        return ConicModel.combination(a, free.vertices)
    rule = free.rule
    d = free.dim
    if rule.diagonal:
        a = model.nonneg_vector(d)
        return ConicModel.combination(a, np.stack([projector(np.eye(d)[k]) for k in range(d)]))
    x = model.hermitian(d)
    if rule.generators is not None:
        a = model.nonneg_vector(rule.generators.shape[0])
        model.add_matrix_eq(x, ConicModel.combination(a, rule.generators))
        return x
    model.add_psd(x)
    if rule.ppt_dims is not None:
        model.add_psd(x.partial_transpose(rule.ppt_dims, len(rule.ppt_dims) - 1))
    return x


def dual_cone_constraint(model: ConicModel, w: AffineMatrix, free: FreeSet) -> None:
    """Tr[W sigma] >= 0 для всех sigma из F"""
    generators = _generators(free)
    if generators is not None:
        for v in generators:
            model.add_ge(w.real_trace_with(v))
        return
    rule = free.rule
    d = free.dim
    if rule.diagonal:
        for k in range(d):
            model.add_ge(w.real_trace_with(projector(np.eye(d)[k])))
        return
    if rule.ppt_dims is not None:
        # двойственный к {X >= 0, X^T_B >= 0} конус: A + B^T_B, A, B >= 0
        b = model.hermitian(d)
        model.add_psd(b)
        model.add_psd(w - b.partial_transpose(rule.ppt_dims, len(rule.ppt_dims) - 1))
    else:
        model.add_psd(w)


def _base_point(free: FreeSet) -> np.ndarray:
    if free.is_hull:
        return free.vertices.mean(axis=0)
    if free.rule.generators is not None:
        return free.rule.generators.mean(axis=0)
    return np.eye(free.dim, dtype=complex) / free.dim


# ========== D_MIN ==========

def d_min(rho: MatrixLike, free: FreeSet) -> MeasureValue:
    """-log2 max_{sigma in F} Tr[Pi_rho sigma]"""
    state = _prepare(rho, free)
    pi = support_projector(state)
    if free.is_hull:
        if free.vectors is not None:
            overlaps = np.real(np.einsum("ki,ij,kj->k", free.vectors.conj(), pi, free.vectors))
        else:
            overlaps = np.real(np.einsum("ij,kji->k", pi, free.vertices))
        best = int(np.argmax(overlaps))
        overlap = float(overlaps[best])
        witness = free.vertex(best)
        gap = 0.0
    else:
        model = ConicModel("d_min")
        sigma = free_cone_expression(model, free)
        model.add_eq(sigma.trace(), 1.0)
        model.maximize(sigma.real_trace_with(pi))
        result = model.solve()
        _require_optimal(result, "d_min")
        overlap = result.value
        witness = _to_state(sigma.evaluate(result.x), free.dims)
        gap = result.solution.gap
    if overlap <= 1e-15:
        logger.warning(f"⚠️ d_min: носитель ортогонален множеству {free.label}, значение бесконечно")
        return MeasureValue.infinite("d_min", witness_operator=pi)
    bits = _clean_bits(-math.log2(min(overlap, 1.0)))
    logger.info(f"d_min[{free.label}] = {bits:.9f}")
    return MeasureValue(bits=bits, measure="d_min", witness_state=witness, witness_operator=pi, dual_gap=gap)


def d_min_stabnorm_relaxation(rho: MatrixLike, n: int) -> MeasureValue:
    """
    Нижняя оценка D_min по множеству {sigma >= 0, Tr sigma = 1, ||sigma||_st <= 1},
    которое содержит все n-кубитные стабилизаторные состояния.
    """
    mat = as_array(rho)
    if mat.shape[0] != 2 ** n:
        raise DimensionMismatch(f"Размерность {mat.shape[0]} != 2^{n}")
    pi = support_projector(mat)
    paulis = pauli_group(n)
    model = ConicModel("d_min_stabnorm")
    sigma = model.hermitian(2 ** n)
    model.add_psd(sigma)
    model.add_eq(sigma.trace(), 1.0)
    u = model.nonneg_vector(paulis.shape[0])
    for k, p in enumerate(paulis):
        coeff = sigma.real_trace_with(p)
        uk = ConicModel.weighted_sum(u[k:k + 1])
        model.add_ge(uk - coeff)
        model.add_ge(uk + coeff)
    model.add_le(ConicModel.weighted_sum(u), float(2 ** n))
    model.maximize(sigma.real_trace_with(pi))
    result = model.solve()
    _require_optimal(result, "d_min_stabnorm")
    bits = _clean_bits(-math.log2(min(result.value, 1.0)))
    return MeasureValue(bits=bits, measure="d_min_stabnorm",
                        witness_state=_to_state(sigma.evaluate(result.x), (2,) * n),
                        witness_operator=pi, dual_gap=result.solution.gap)


# ========== D_MAX (ОБОБЩЁННАЯ РОБАСТНОСТЬ) ==========

def _robustness_sdp(label: str, rho_expr, free: FreeSet, model: ConicModel) -> Tuple[AffineMatrix, int]:
    sigma = free_cone_expression(model, free)
    handle = model.add_psd(sigma - rho_expr)
    model.minimize(sigma.trace())
    return sigma, handle


def _complement(sigma_t: np.ndarray, rho: np.ndarray, t: float, dims) -> Optional[DensityMatrix]:
    if t - 1.0 <= COMPLEMENT_TOL:
        return None
    return _to_state((sigma_t - rho) / (t - 1.0), dims)


def _d_max_vertices(state: DensityMatrix, free: FreeSet, generators: np.ndarray) -> MeasureValue:
    robustness = vertex_robustness(state.matrix, generators, "d_max")
    if robustness.status is not SolutionStatus.OPTIMAL:
        if robustness.status is SolutionStatus.UNBOUNDED or not free.contains_full_rank_state:
            logger.warning(f"⚠️ d_max[{free.label}]: нет допустимого sigma ({robustness.status.value})")
            raise Unbounded(f"d_max: нет свободного sigma с rho <= t sigma в {free.label}")
        _require_optimal(robustness.solution, "d_max")
    t = robustness.value
    sigma_t = robustness.sigma(generators)
    bits = _clean_bits(math.log2(max(t, 1e-300)))
    logger.info(f"d_max[{free.label}] = {bits:.9f}")
    return MeasureValue(
        bits=bits,
        measure="d_max",
        witness_state=_to_state(sigma_t, free.dims),
        witness_operator=robustness.witness,
        complement=_complement(sigma_t, state.matrix, t, free.dims),
        dual_gap=robustness.solution.solution.gap,
        iterations=robustness.solution.solution.iterations,
    )


def d_max(rho: MatrixLike, free: FreeSet) -> MeasureValue:
    """log2 min {t : rho <= t sigma, sigma in F}"""
    state = _prepare(rho, free)
    if free.is_hull:
        return _d_max_vertices(state, free, free.vertices)
    model = ConicModel("d_max")
    sigma, handle = _robustness_sdp("d_max", state.matrix, free, model)
    try:
        result = model.solve()
    except NumericalBreakdown:
        if free.rule.generators is None:
            raise
        result = None
    if free.rule.generators is not None and (result is None or result.status is SolutionStatus.MAX_ITER):
        logger.warning(f"⚠️ d_max[{free.label}]: описание конуса не сошлось, решается по строкам образующих")
        return _d_max_vertices(state, free, free.rule.generators)
    if result.status is not SolutionStatus.OPTIMAL:
        if not free.contains_full_rank_state or result.status is SolutionStatus.INFEASIBLE:
            logger.warning(f"⚠️ d_max[{free.label}]: нет допустимого sigma ({result.status.value})")
            raise Unbounded(f"d_max: нет свободного sigma с rho <= t sigma в {free.label}")
        _require_optimal(result, "d_max")
    t = result.value
    sigma_t = sigma.evaluate(result.x)
    bits = _clean_bits(math.log2(max(t, 1e-300)))
    logger.info(f"d_max[{free.label}] = {bits:.9f}")
    return MeasureValue(
        bits=bits,
        measure="d_max",
        witness_state=_to_state(sigma_t, free.dims),
        witness_operator=result.psd_dual(handle),
        complement=_complement(sigma_t, state.matrix, t, free.dims),
        dual_gap=result.solution.gap,
        iterations=result.solution.iterations,
    )


# ========== D_S (СТАНДАРТНАЯ РОБАСТНОСТЬ) ==========

def _d_s_vertex_lp(state: DensityMatrix, free: FreeSet) -> MeasureValue:
    # rho = sum a_i v_i - sum b_i v_i, a, b >= 0, min sum b
    coords = free.vertex_coordinates
    k = coords.shape[0]
    program = LinearProgram(
        objective=np.concatenate([np.zeros(k), np.ones(k)]),
        eq_matrix=np.hstack([coords.T, -coords.T]),
        eq_rhs=to_real_coordinates(state.matrix),
        label=f"d_s_{free.label}",
    )
    solution = solve_lp(program)
    if solution.status is SolutionStatus.INFEASIBLE:
        logger.warning(f"⚠️ d_s[{free.label}]: состояние вне аффинной оболочки, D_s = inf")
        return MeasureValue.infinite("d_s")
    if solution.status is not SolutionStatus.OPTIMAL:
        logger.error(f"❌ d_s: решатель вернул {solution.status.value}")
        raise SolverFailure(f"d_s: статус {solution.status.value}", solution.status)
    a, b = solution.primal[:k], solution.primal[k:]
    s = max(float(solution.value), 0.0)
    plus = np.tensordot(a, free.vertices, axes=1)
    minus = np.tensordot(b, free.vertices, axes=1)
    witness = -from_real_coordinates(solution.dual.eq, free.dim)
    return MeasureValue(
        bits=_clean_bits(math.log2(1.0 + s)),
        measure="d_s",
        witness_state=_to_state(plus, free.dims),
        witness_operator=witness,
        complement=_to_state(minus, free.dims) if s > COMPLEMENT_TOL else None,
        dual_gap=solution.gap,
        iterations=solution.iterations,
    )


def _d_s_cone(rho_expr, free: FreeSet, label: str, model: ConicModel):
    plus = free_cone_expression(model, free)
    minus = free_cone_expression(model, free)
    model.add_matrix_eq(plus - minus, rho_expr)
    model.minimize(minus.trace())
    return plus, minus


def d_s(rho: MatrixLike, free: FreeSet) -> MeasureValue:
    """log2(1 + s), s = min {s : (rho + s tau)/(1 + s) in F, tau in F}"""
    state = _prepare(rho, free)
    if free.is_hull:
        value = _d_s_vertex_lp(state, free)
    else:
        model = ConicModel("d_s")
        plus, minus = _d_s_cone(state.matrix, free, "d_s", model)
        result = model.solve()
        if result.status is SolutionStatus.INFEASIBLE:
            logger.warning(f"⚠️ d_s[{free.label}]: недопустимая задача, D_s = inf")
            return MeasureValue.infinite("d_s")
        _require_optimal(result, "d_s")
        s = max(result.value, 0.0)
        value = MeasureValue(
            bits=_clean_bits(math.log2(1.0 + s)),
            measure="d_s",
            witness_state=_to_state(plus.evaluate(result.x), free.dims),
            complement=_to_state(minus.evaluate(result.x), free.dims) if s > COMPLEMENT_TOL else None,
            dual_gap=result.solution.gap,
            iterations=result.solution.iterations,
        )
    logger.info(f"d_s[{free.label}] = {value.bits:.9f}")
    return value


# ========== ГИПОТЕЗЫ: D_H ==========

def d_h(rho: MatrixLike, free: FreeSet, eps: float) -> MeasureValue:
    """
    -log2 min_{P} max_{sigma in F} Tr[P sigma] при 0 <= P <= I, Tr[P rho] >= 1 - eps.

    Перестановка min и max допустима: F выпукло и компактно, цель билинейна.
    При eps = 0 оптимальный тест - проектор на носитель, и мера совпадает с d_min.
    """
    eps = _check_eps(eps)
    state = _prepare(rho, free)
    if eps == 0.0:
        value = d_min(state, free)
        value.measure = "d_h"
        return value
    d = free.dim
    model = ConicModel("d_h")
    p = model.hermitian(d)
    t = model.scalar()
    model.add_psd(p)
    model.add_psd(np.eye(d) - p)
    model.add_ge(p.real_trace_with(state.matrix), 1.0 - eps)
    dual_cone_constraint(model, _scalar_times(t, np.eye(d)) - p, free)
    model.minimize(t)
    result = model.solve()
    _require_optimal(result, "d_h")
    if result.value <= 1e-12:
        logger.warning(f"⚠️ d_h[{free.label}]: тест отделяет rho от F без ошибки, значение бесконечно")
        return MeasureValue.infinite("d_h", witness_operator=p.evaluate(result.x))
    bits = _clean_bits(-math.log2(result.value))
    logger.info(f"d_h[{free.label}, eps={eps}] = {bits:.9f}")
    return MeasureValue(bits=bits, measure="d_h", witness_operator=p.evaluate(result.x),
                        dual_gap=result.solution.gap, iterations=result.solution.iterations)


def _scalar_times(t, m: np.ndarray) -> AffineMatrix:
    """t M для скалярного выражения t и постоянной матрицы M"""
    m = np.asarray(m, dtype=complex)
    return AffineMatrix(t.constant * m, t.idx, t.coef[:, None, None] * m[None])


# ========== СГЛАЖЕННЫЕ МЕРЫ ==========

def _fidelity_ball(model: ConicModel, state: DensityMatrix, eps: float) -> AffineMatrix:
    """
    rho' с Tr rho' = 1 и F(rho', rho) >= 1 - eps.

    sqrt F(rho', rho) = max Re Tr X при [[rho', X^+], [X, rho]] >= 0; блок rho
    сужается на его носитель, чтобы ограничение было строго допустимым.
    """
    d = state.dim
    w, v = herm_eig(state.matrix)
    keep = w > 1e-12
    lam, basis = w[keep], v[:, keep]
    r = lam.shape[0]
    rho_p = model.hermitian(d)
    y = model.complex_matrix(r, d)
    model.add_eq(rho_p.trace(), 1.0)
    model.add_psd(AffineMatrix.block([[rho_p, y.H], [y, np.diag(lam).astype(complex)]]))
    # Tr X = Tr[V Y]
    model.add_ge((basis @ y).trace(), math.sqrt(1.0 - eps))
    return rho_p


def _ball_contains_free(t: float) -> bool:
    return t <= 1.0 + CONTAINED_TOL


def d_max_smooth(rho: MatrixLike, free: FreeSet, eps: float) -> MeasureValue:
    """inf D_max(rho') по rho' с F(rho', rho) >= 1 - eps"""
    eps = _check_eps(eps)
    state = _prepare(rho, free)
    if eps == 0.0:
        value = d_max(state, free)
        value.measure = "d_max_smooth"
        return value
    model = ConicModel("d_max_smooth")
    rho_p = _fidelity_ball(model, state, eps)
    sigma = free_cone_expression(model, free)
    handle = model.add_psd(sigma - rho_p)
    model.minimize(sigma.trace())
    result = model.solve()
    _require_optimal(result, "d_max_smooth")
    smoothed = _to_state(rho_p.evaluate(result.x), free.dims)
    if _ball_contains_free(result.value):
        logger.info(f"d_max_smooth[{free.label}, eps={eps}]: шар содержит свободное состояние")
        return MeasureValue(bits=0.0, status=MeasureStatus.CONTAINED, measure="d_max_smooth",
                            witness_state=smoothed, dual_gap=result.solution.gap)
    bits = _clean_bits(math.log2(result.value))
    logger.info(f"d_max_smooth[{free.label}, eps={eps}] = {bits:.9f}")
    return MeasureValue(bits=bits, measure="d_max_smooth", witness_state=smoothed,
                        witness_operator=result.psd_dual(handle), dual_gap=result.solution.gap,
                        iterations=result.solution.iterations)


def d_s_smooth(rho: MatrixLike, free: FreeSet, eps: float) -> MeasureValue:
    """inf D_s(rho') по rho' с F(rho', rho) >= 1 - eps"""
    eps = _check_eps(eps)
    state = _prepare(rho, free)
    if eps == 0.0:
        value = d_s(state, free)
        value.measure = "d_s_smooth"
        return value
    model = ConicModel("d_s_smooth")
    rho_p = _fidelity_ball(model, state, eps)
    _d_s_cone(rho_p, free, "d_s_smooth", model)
    result = model.solve()
    if result.status is SolutionStatus.INFEASIBLE:
        logger.warning(f"⚠️ d_s_smooth[{free.label}]: шар вне аффинной оболочки, D_s = inf")
        return MeasureValue.infinite("d_s_smooth")
    _require_optimal(result, "d_s_smooth")
    smoothed = _to_state(rho_p.evaluate(result.x), free.dims)
    s = max(result.value, 0.0)
    if s <= CONTAINED_TOL:
        return MeasureValue(bits=0.0, status=MeasureStatus.CONTAINED, measure="d_s_smooth",
                            witness_state=smoothed, dual_gap=result.solution.gap)
    bits = _clean_bits(math.log2(1.0 + s))
    logger.info(f"d_s_smooth[{free.label}, eps={eps}] = {bits:.9f}")
    return MeasureValue(bits=bits, measure="d_s_smooth", witness_state=smoothed,
                        dual_gap=result.solution.gap, iterations=result.solution.iterations)


# ========== АФФИННЫЕ МЕРЫ ==========

def _affine_point(model: ConicModel, free: FreeSet) -> AffineMatrix:
    theta = model.variables(free.affine_basis.shape[0])
    return AffineMatrix(_base_point(free), theta, free.affine_basis)


def d_h_aff(rho: MatrixLike, free: FreeSet, eps: float) -> MeasureValue:
    """
    -log2 max_{sigma in aff(F)} min_P Tr[P sigma] при 0 <= P <= I, Tr[P rho] >= 1 - eps.

    Внутренний минимум заменён двойственной задачей
    max y (1 - eps) - Tr Y при sigma - y rho + Y >= 0, Y >= 0, y >= 0.
    Множитель этого блока - оптимальный тест P.
    """
    eps = _check_eps(eps)
    state = _prepare(rho, free)
    label = "d_min_aff" if eps == 0.0 else "d_h_aff"
    if free.full_dimensional and eps == 0.0:
        logger.info(f"{label}[{free.label}]: множество полной размерности, значение 0")
        return MeasureValue(bits=0.0, measure=label, witness_operator=np.eye(free.dim, dtype=complex), dual_gap=0.0)
    d = free.dim
    model = ConicModel(label)
    sigma = _affine_point(model, free)
    if eps == 0.0:
        # Tr[P rho] = 1 фиксирует P = Pi + P', P' на дополнении носителя:
        # max Tr[Pi sigma] - Tr Y' при Q^+ sigma Q + Y' >= 0, Y' >= 0
        w, v = herm_eig(state.matrix)
        pi = support_projector(state)
        q = v[:, w <= 1e-8]
        objective = sigma.real_trace_with(pi)
        handle = None
        if q.shape[1]:
            y_c = model.hermitian(q.shape[1])
            model.add_psd(y_c)
            handle = model.add_psd((q.conj().T @ sigma) @ q + y_c)
            objective = objective - y_c.trace()
        model.maximize(objective)
        result = model.solve()
        _require_optimal(result, label)
        effect = pi.copy()
        if handle is not None:
            effect = effect + q @ result.psd_dual(handle) @ q.conj().T
    else:
        y = model.scalar(lower=0.0)
        big_y = model.hermitian(d)
        model.add_psd(big_y)
        handle = model.add_psd(sigma - _scalar_times(y, state.matrix) + big_y)
        model.maximize(y * (1.0 - eps) - big_y.trace())
        result = model.solve()
        _require_optimal(result, label)
        effect = result.psd_dual(handle)
    if result.value <= 1e-12:
        logger.warning(f"⚠️ {label}[{free.label}]: внутренний оптимум {result.value:.3e} <= 0, значение бесконечно")
        return MeasureValue.infinite(label, witness_operator=effect)
    bits = _clean_bits(-math.log2(result.value))
    logger.info(f"{label}[{free.label}] = {bits:.9f}")
    return MeasureValue(bits=bits, measure=label, witness_operator=effect,
                        witness_state=None, dual_gap=result.solution.gap,
                        iterations=result.solution.iterations)


def d_min_aff(rho: MatrixLike, free: FreeSet) -> MeasureValue:
    return d_h_aff(rho, free, 0.0)


# ========== ВЕС, РАССТОЯНИЕ, НОРМА ==========

def weight(rho: MatrixLike, free: FreeSet) -> float:
    """max w: rho = w sigma + (1 - w) tau, sigma in F"""
    state = _prepare(rho, free)
    model = ConicModel("weight")
    sigma = free_cone_expression(model, free)
    model.add_psd(state.matrix - sigma)
    model.maximize(sigma.trace())
    result = model.solve()
    _require_optimal(result, "weight")
    value = float(min(max(result.value, 0.0), 1.0))
    logger.info(f"weight[{free.label}] = {value:.9f}")
    return value


def r_tr(rho: MatrixLike, free: FreeSet) -> float:
    """min_{sigma in F} (1/2)||rho - sigma||_1"""
    state = _prepare(rho, free)
    model = ConicModel("r_tr")
    sigma = free_cone_expression(model, free)
    model.add_eq(sigma.trace(), 1.0)
    y = model.hermitian(free.dim)
    model.add_psd(y)
    model.add_psd(y - (state.matrix - sigma))
    model.minimize(y.trace())
    result = model.solve()
    _require_optimal(result, "r_tr")
    value = float(min(max(result.value, 0.0), 1.0))
    logger.info(f"r_tr[{free.label}] = {value:.9f}")
    return value


def stab_norm(a: np.ndarray, n: int) -> float:
    """(1/2^n) sum_P |Tr[A P]|"""
    a = as_array(a)
    if a.shape != (2 ** n, 2 ** n):
        raise DimensionMismatch(f"Оператор {a.shape} не действует на {n} кубитах")
    paulis = pauli_group(n)
    coeffs = np.einsum("kij,ji->k", paulis, a)
    return float(np.sum(np.abs(coeffs)) / 2 ** n)


def g_fidelity(rho: MatrixLike, free: FreeSet, k: float) -> FidelityPair:
    """
    Верность дистилляции G_F(rho; K).

    Прямая: max Tr[W rho] при 0 <= W <= I, Tr[W sigma] <= 1/K на F.
    Двойственная: min Tr Y + Tr[Z]/K при Y >= rho - Z, Y >= 0, Z in cone(F).
    """
    if k < 1.0:
        raise OutOfRange(f"K = {k} < 1")
    state = _prepare(rho, free)
    d = free.dim
    eye = np.eye(d, dtype=complex)

    primal_model = ConicModel("g_fidelity_primal")
    w = primal_model.hermitian(d)
    primal_model.add_psd(w)
    primal_model.add_psd(eye - w)
    dual_cone_constraint(primal_model, eye / k - w, free)
    primal_model.maximize(w.real_trace_with(state.matrix))
    primal = primal_model.solve()
    _require_optimal(primal, "g_fidelity (прямая)")

    dual_model = ConicModel("g_fidelity_dual")
    z = free_cone_expression(dual_model, free)
    y = dual_model.hermitian(d)
    dual_model.add_psd(y)
    dual_model.add_psd(y - (state.matrix - z))
    dual_model.minimize(y.trace() + z.trace() / k)
    dual = dual_model.solve()
    _require_optimal(dual, "g_fidelity (двойственная)")

    pair = FidelityPair(primal=primal.value, dual=dual.value)
    logger.info(f"g_fidelity[{free.label}, K={k}] = {pair.primal:.9f} / {pair.dual:.9f}")
    return pair


# ========== ЛЕСТНИЦА ЭТАЛОНОВ, ВЫХОД И СТОИМОСТЬ ==========

@dataclass(frozen=True)
class ReferenceLadder:
    """Строго возрастающие скорости r_k эталонных состояний Phi_k"""
    rates: Tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        if not self.rates:
            raise EmptyLadder("Лестница эталонов пуста")
        if any(b <= a for a, b in zip(self.rates, self.rates[1:])):
            raise OutOfRange(f"Скорости лестницы должны строго возрастать: {self.rates}")

    @classmethod
    def multiples(cls, unit: float, count: int, label: str = "") -> "ReferenceLadder":
        """unit, 2 unit, ..., count unit"""
        return cls(tuple(unit * (j + 1) for j in range(count)), label)

    def floor(self, value: float) -> float:
        # 0 - неявная нижняя ступень (ничего не дистиллировано)
        below = [r for r in self.rates if r <= value + LADDER_SLACK]
        return max(below) if below else 0.0

    def ceil(self, value: float) -> float:
        above = [r for r in self.rates if r >= value - LADDER_SLACK]
        if not above:
            logger.warning(f"⚠️ Значение {value:.6f} выше верхней ступени лестницы {self.rates[-1]}")
            return math.inf
        return min(above)


def one_shot_yield(rho: MatrixLike, free: FreeSet, ladder: ReferenceLadder, eps: float) -> float:
    """Наибольшая ступень <= D_H^eps (D_H,aff^eps для множеств неполной размерности)"""
    measure = d_h(rho, free, eps) if free.full_dimensional else d_h_aff(rho, free, eps)
    if not measure.is_finite:
        return ladder.rates[-1]
    return ladder.floor(measure.bits)


def one_shot_cost(rho: MatrixLike, free: FreeSet, ladder: ReferenceLadder, eps: float) -> float:
    """Наименьшая ступень >= D_s^eps (D_max^eps для множеств неполной размерности)"""
    measure = d_s_smooth(rho, free, eps) if free.full_dimensional else d_max_smooth(rho, free, eps)
    if not measure.is_finite:
        return math.inf
    return ladder.ceil(measure.bits)
