"""
Плотные LP и SDP: типы задач, пресолв равенств, вызов ядра внутренней
точки и двойственные сертификаты.

Эрмитовы PSD-ограничения над C вкладываются в вещественные блоки двойного
размера; двойственная матрица возвращается в комплексной форме W с
Tr[F W] = Tr[emb(F) Z].
"""
import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, TextIO, Tuple

import numpy as np

from src import config
from src.errors import DimensionMismatch, NonHermitian, NotSolved, NumericalBreakdown
from src.services.interior_point import (
    BoundBlock,
    ConeBlock,
    KernelSettings,
    KernelStatus,
    LinearBlock,
    PsdBlock,
    solve_cone_program,
)
from src.utils.linalg import complex_from_embedding, real_embedding

logger = logging.getLogger(__name__)

MAX_BLOCK_DIM = 64
DATA_HERMITIAN_TOL = 1e-10


class SolutionStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"


@dataclass
class SolverSettings:
    """Допуски на вызов; по умолчанию берутся из конфигурации (RESQ_TOL, RESQ_MAX_ITER)"""
    feastol: float = 1e-9
    gaptol: float = 1e-9
    accept_feastol: float = 1e-7
    accept_gaptol: float = 1e-6
    max_iter: int = 200

    @classmethod
    def from_config(cls, **overrides) -> "SolverSettings":
        settings = cls(max_iter=config.SOLVER_MAX_ITER)
        if config.SOLVER_TOL is not None:
            tol = float(config.SOLVER_TOL)
            settings.feastol = tol
            settings.gaptol = tol
            settings.accept_feastol = max(settings.accept_feastol, tol)
            settings.accept_gaptol = max(settings.accept_gaptol, tol)
        for key, value in overrides.items():
            setattr(settings, key, value)
        return settings

    def kernel(self) -> KernelSettings:
        return KernelSettings(
            feastol=self.feastol,
            abstol=self.gaptol,
            reltol=self.gaptol,
            accept_feastol=self.accept_feastol,
            accept_gaptol=self.accept_gaptol,
            maxiters=self.max_iter,
        )


# ========== ТИПЫ ЗАДАЧ ==========

@dataclass
class LinearProgram:
    """minimize c^T x при A x = b, x >= lower (lower может содержать -inf)"""
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    lower: Optional[np.ndarray] = None
    label: str = "lp"

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.shape[0]
        self.eq_matrix = np.asarray(self.eq_matrix, dtype=float).reshape(-1, n)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise DimensionMismatch(
                f"Число строк равенств {self.eq_matrix.shape[0]} != длина правой части {self.eq_rhs.shape[0]}")
        if not np.all(np.isfinite(self.eq_rhs)):
            raise ValueError("Правая часть равенств должна быть конечной")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        if self.lower.shape[0] != n:
            raise DimensionMismatch(f"Длина нижних границ {self.lower.shape[0]} != {n}")


@dataclass
class PsdConstraint:
    """sum_i y[variables[i]] F_i - G >= 0 (эрмитовы данные)"""
    constant: np.ndarray
    variables: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        self.constant = np.asarray(self.constant, dtype=complex)
        self.variables = np.asarray(self.variables, dtype=int).reshape(-1)
        q = self.constant.shape[0]
        self.coefficients = np.asarray(self.coefficients, dtype=complex).reshape(len(self.variables), q, q)
        if q > MAX_BLOCK_DIM:
            raise DimensionMismatch(f"Размер PSD-блока {q} больше {MAX_BLOCK_DIM}")
        for name, data in (("G", self.constant[None]), ("F", self.coefficients)):
            if data.size and np.max(np.abs(data - np.conj(np.swapaxes(data, 1, 2)))) > DATA_HERMITIAN_TOL:
                raise NonHermitian(f"Данные блока ({name}) не эрмитовы")

    @property
    def size(self) -> int:
        return self.constant.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.constant.imag), initial=0.0) <= 1e-14
                    and np.max(np.abs(self.coefficients.imag), initial=0.0) <= 1e-14)


@dataclass
class SdpProblem:
    """minimize c^T y при PSD-блоках, равенствах, неравенствах A y >= b и нижних границах"""
    variable_count: int
    objective: np.ndarray
    blocks: List[PsdConstraint] = field(default_factory=list)
    eq_matrix: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    ineq_matrix: Optional[np.ndarray] = None
    ineq_rhs: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    label: str = "sdp"

    def __post_init__(self):
        m = int(self.variable_count)
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        if self.objective.shape[0] != m:
            raise DimensionMismatch(f"Длина цели {self.objective.shape[0]} != {m}")
        self.eq_matrix = np.zeros((0, m)) if self.eq_matrix is None else np.asarray(self.eq_matrix, float).reshape(-1, m)
        self.eq_rhs = np.zeros(0) if self.eq_rhs is None else np.asarray(self.eq_rhs, float).reshape(-1)
        self.ineq_matrix = (np.zeros((0, m)) if self.ineq_matrix is None
                            else np.asarray(self.ineq_matrix, float).reshape(-1, m))
        self.ineq_rhs = np.zeros(0) if self.ineq_rhs is None else np.asarray(self.ineq_rhs, float).reshape(-1)
        self.lower = np.full(m, -np.inf) if self.lower is None else np.asarray(self.lower, float).reshape(-1)
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0] or self.ineq_matrix.shape[0] != self.ineq_rhs.shape[0]:
            raise DimensionMismatch("Размеры строк и правых частей не совпадают")
        if self.lower.shape[0] != m:
            raise DimensionMismatch(f"Длина нижних границ {self.lower.shape[0]} != {m}")
        for blk in self.blocks:
            if blk.variables.size and blk.variables.max() >= m:
                raise DimensionMismatch(f"PSD-блок ссылается на переменную вне 0..{m - 1}")


@dataclass
class DualCertificate:
    eq: np.ndarray
    ineq: np.ndarray
    bounds: np.ndarray
    blocks: List[np.ndarray]


@dataclass
class Solution:
    status: SolutionStatus
    value: float
    primal: np.ndarray
    dual: Optional[DualCertificate]
    gap: float
    dual_value: float = math.nan
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    iterations: int = 0
    accepted: bool = False

    @property
    def is_optimal(self) -> bool:
        return self.status is SolutionStatus.OPTIMAL


# ========== ПРЕСОЛВ ==========

def presolve_equalities(a: np.ndarray, b: np.ndarray, tol: float = 1e-10
                        ) -> Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]:
    """
    Удаляет линейно зависимые строки равенств.

    Returns:
        (A', b', U_r) с A' = U_r^T A; (None, None, None) если система несовместна
    """
    if a.shape[0] == 0:
        return a, b, np.zeros((0, 0))
    u, sv, _ = np.linalg.svd(a, full_matrices=False)
    smax = float(sv[0]) if sv.size else 0.0
    rank = int(np.sum(sv > tol * max(1.0, smax) * max(a.shape)))
    u_r = u[:, :rank]
    b_r = u_r.T @ b
    residual = float(np.linalg.norm(b - u_r @ b_r))
    if residual > 1e-9 * max(1.0, float(np.linalg.norm(b))):
        logger.debug(f"Пресолв: несовместные равенства, невязка {residual:.3e}")
        return None, None, None
    if rank < a.shape[0]:
        logger.debug(f"Пресолв: удалено {a.shape[0] - rank} зависимых строк из {a.shape[0]}")
    return u_r.T @ a, b_r, u_r


# ========== РЕШЕНИЕ ==========

def _to_kernel_blocks(problem: SdpProblem) -> Tuple[List[ConeBlock], List[bool]]:
    blocks: List[ConeBlock] = []
    finite = np.isfinite(problem.lower)
    if np.any(finite):
        blocks.append(BoundBlock(np.flatnonzero(finite), problem.lower[finite]))
    if problem.ineq_matrix.shape[0]:
        blocks.append(LinearBlock(-problem.ineq_matrix, -problem.ineq_rhs))
    embedded = []
    for blk in problem.blocks:
        if blk.is_real:
            mats = -blk.coefficients.real
            h = -blk.constant.real
            embedded.append(False)
        else:
            mats = -np.stack([real_embedding(f) for f in blk.coefficients]) if len(blk.variables) \
                else np.zeros((0, 2 * blk.size, 2 * blk.size))
            h = -real_embedding(blk.constant)
            embedded.append(True)
        blocks.append(PsdBlock(blk.variables, mats, h))
    return blocks, embedded


def _infeasible_solution(problem: SdpProblem) -> Solution:
    return Solution(status=SolutionStatus.INFEASIBLE, value=math.inf,
                    primal=np.full(problem.variable_count, math.nan), dual=None, gap=math.nan)


def solve_sdp(problem: SdpProblem, settings: Optional[SolverSettings] = None) -> Solution:
    """
    Решает SdpProblem.

    Raises:
        NumericalBreakdown: система Ньютона вырождена и точка не принята
    """
    settings = settings or SolverSettings.from_config()
    if config.DUMP_DIR:
        dump_problem_to_dir(problem, config.DUMP_DIR)

    a, b, u_r = presolve_equalities(problem.eq_matrix, problem.eq_rhs)
    if a is None:
        logger.info(f"[{problem.label}] пресолв: задача несовместна")
        return _infeasible_solution(problem)

    blocks, embedded = _to_kernel_blocks(problem)
    result = solve_cone_program(problem.objective, blocks, a, b, settings.kernel(), label=problem.label)

    if result.status is KernelStatus.STALLED and not result.accepted:
        logger.error(f"❌ [{problem.label}] решатель остановился: pres={result.pres:.1e} "
                     f"dres={result.dres:.1e} gap={result.gap:.1e}")
        raise NumericalBreakdown(f"[{problem.label}] вырожденная система Ньютона, итерация {result.iterations}")

    status = {
        KernelStatus.OPTIMAL: SolutionStatus.OPTIMAL,
        KernelStatus.PRIMAL_INFEASIBLE: SolutionStatus.INFEASIBLE,
        KernelStatus.DUAL_INFEASIBLE: SolutionStatus.UNBOUNDED,
        KernelStatus.MAX_ITER: SolutionStatus.MAX_ITER,
        KernelStatus.STALLED: SolutionStatus.OPTIMAL,
    }[result.status]

    # двойственные переменные в исходной нумерации
    offset = 0
    bounds = np.zeros(problem.variable_count)
    ineq = np.zeros(problem.ineq_matrix.shape[0])
    if np.any(np.isfinite(problem.lower)):
        bounds[np.isfinite(problem.lower)] = result.z[offset]
        offset += 1
    if problem.ineq_matrix.shape[0]:
        ineq = result.z[offset]
        offset += 1
    dual_blocks = []
    for zk, is_embedded in zip(result.z[offset:], embedded):
        dual_blocks.append(2.0 * complex_from_embedding(zk) if is_embedded else zk.astype(complex))
    eq = u_r @ result.y if u_r.size else np.zeros(problem.eq_matrix.shape[0])

    solution = Solution(
        status=status,
        value=result.pcost,
        primal=result.x,
        dual=DualCertificate(eq=eq, ineq=ineq, bounds=bounds, blocks=dual_blocks),
        gap=abs(result.pcost - result.dcost),
        dual_value=result.dcost,
        primal_residual=result.pres,
        dual_residual=result.dres,
        iterations=result.iterations,
        accepted=result.accepted,
    )
    if status is SolutionStatus.UNBOUNDED:
        solution.value = -math.inf
    elif status is SolutionStatus.INFEASIBLE:
        solution.value = math.inf
    logger.debug(f"[{problem.label}] {status.value}: value={solution.value:.10g} "
                 f"gap={solution.gap:.1e} it={result.iterations}")
    return solution


def solve_lp(program: LinearProgram, settings: Optional[SolverSettings] = None) -> Solution:
    """Решает LinearProgram тем же ядром (только неотрицательные блоки)"""
    problem = SdpProblem(
        variable_count=program.objective.shape[0],
        objective=program.objective,
        eq_matrix=program.eq_matrix,
        eq_rhs=program.eq_rhs,
        lower=program.lower,
        label=program.label,
    )
    return solve_sdp(problem, settings)


def check_duality_gap(solution: Solution) -> float:
    """|primal - dual| для оптимального решения"""
    if not solution.is_optimal:
        raise NotSolved(f"Разрыв двойственности не определён для статуса {solution.status.value}")
    return abs(solution.value - solution.dual_value)


# ========== ОТЛАДОЧНЫЙ ДАМП ==========

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _fmt_complex(v: complex) -> str:
    return f"{v.real:.17g},{v.imag:.17g}"


def write_problem_dump(problem: SdpProblem, stream: TextIO) -> None:
    """
    Текстовый дамп задачи. Секции: variables, objective, equalities,
    inequalities, lower, затем для каждого блока constant и coefficient <j>;
    комплексные элементы пишутся как "re,im".
    """
    stream.write(f"# resq problem {problem.label}\n")
    stream.write(f"variables {problem.variable_count}\n")
    stream.write("objective\n" + " ".join(_fmt(v) for v in problem.objective) + "\n")
    for name, mat, rhs in (("equalities", problem.eq_matrix, problem.eq_rhs),
                           ("inequalities", problem.ineq_matrix, problem.ineq_rhs)):
        stream.write(f"{name} {mat.shape[0]}\n")
        for row, r in zip(mat, rhs):
            stream.write(" ".join(_fmt(v) for v in row) + " | " + _fmt(r) + "\n")
    stream.write("lower\n" + " ".join(_fmt(v) for v in problem.lower) + "\n")
    for k, blk in enumerate(problem.blocks):
        stream.write(f"block {k} size {blk.size}\nconstant\n")
        for row in blk.constant:
            stream.write(" ".join(_fmt_complex(v) for v in row) + "\n")
        for var, coef in zip(blk.variables, blk.coefficients):
            stream.write(f"coefficient {int(var)}\n")
            for row in coef:
                stream.write(" ".join(_fmt_complex(v) for v in row) + "\n")


def problem_fingerprint(problem: SdpProblem) -> str:
    digest = hashlib.sha1()
    for arr in (problem.objective, problem.eq_matrix, problem.eq_rhs, problem.ineq_matrix,
                problem.ineq_rhs, problem.lower):
        digest.update(np.ascontiguousarray(arr).tobytes())
    for blk in problem.blocks:
        digest.update(np.ascontiguousarray(blk.constant).tobytes())
        digest.update(np.ascontiguousarray(blk.coefficients).tobytes())
    return digest.hexdigest()[:12]


def dump_problem_to_dir(problem: SdpProblem, directory: str) -> Optional[str]:
    try:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"{problem.label}_{problem_fingerprint(problem)}.txt")
        with open(path, "w", encoding="utf-8") as fh:
            write_problem_dump(problem, fh)
        logger.debug(f"Дамп задачи записан: {path}")
        return path
    except OSError as e:
        logger.warning(f"⚠️ Не удалось записать дамп задачи в {directory}: {e}")
        return None
