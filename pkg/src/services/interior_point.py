"""
Ядро прямо-двойственного метода внутренней точки.

Решает конусную программу

    minimize    c^T x
    subject to  G x + s = h,   A x = b,   s in K

где K - произведение блоков: неотрицательные ограничения на переменные,
неотрицательный ортант линейных строк и вещественные симметричные
PSD-блоки. Двойственная задача:

    maximize    -h^T z - b^T y
    subject to  G^T z + A^T y + c = 0,   z in K

Направление HKM с предиктором-корректором Мерота, раздельные шаги для
прямых и двойственных переменных, плотный Холецкий на дополнении Шура.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from src.errors import NumericalBreakdown

logger = logging.getLogger(__name__)


class KernelStatus(Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    MAX_ITER = "max_iter"
    STALLED = "stalled"


@dataclass
class KernelSettings:
    """Допуски ядра; имена как в опциях conelp"""
    feastol: float = 1e-9
    abstol: float = 1e-9
    reltol: float = 1e-9
    accept_feastol: float = 1e-7
    accept_gaptol: float = 1e-6
    certificate_tol: float = 1e-8
    maxiters: int = 200
    step: float = 0.98
    minstep: float = 1e-10


@dataclass
class KernelResult:
    status: KernelStatus
    x: np.ndarray
    y: np.ndarray
    s: List[np.ndarray]
    z: List[np.ndarray]
    pcost: float
    dcost: float
    gap: float
    pres: float
    dres: float
    iterations: int
    accepted: bool = False


# ========== БЛОКИ КОНУСА ==========

class ConeBlock(ABC):
    """Блок конуса: s_k = h_k - G_k x, s_k и z_k лежат в конусе блока"""

    degree: int
    h: np.ndarray

    @abstractmethod
    def lin(self, x: np.ndarray) -> np.ndarray:
        """G_k x"""

    @abstractmethod
    def adj(self, z: np.ndarray, n: int) -> np.ndarray:
        """G_k^T z как вектор длины n"""

    @abstractmethod
    def identity(self) -> np.ndarray:
        pass

    @abstractmethod
    def hessian_add(self, hess: np.ndarray, s: np.ndarray, z: np.ndarray) -> None:
        """Добавляет G_k^T W G_k к матрице (или диагонали) hess"""

    @abstractmethod
    def scaled(self, s: np.ndarray, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        """W(v), линеаризация комплементарности"""

    @abstractmethod
    def centering(self, s: np.ndarray, z: np.ndarray, target: float,
                  ds_aff: Optional[np.ndarray], dz_aff: Optional[np.ndarray]) -> np.ndarray:
        """Свободный член q в dz = -W(ds) + q"""

    @abstractmethod
    def max_step(self, v: np.ndarray, dv: np.ndarray) -> float:
        pass

    @abstractmethod
    def min_eig(self, v: np.ndarray) -> float:
        pass

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(u * v))

    def shift(self, v: np.ndarray, alpha: float) -> np.ndarray:
        return v + alpha * self.identity()


class BoundBlock(ConeBlock):
    """x[idx] >= lower: s = x[idx] - lower, то есть G = -E, h = -lower"""

    def __init__(self, idx: np.ndarray, lower: np.ndarray):
        self.idx = np.asarray(idx, dtype=int)
        self.h = -np.asarray(lower, dtype=float)
        self.degree = len(self.idx)

    def lin(self, x):
        return -x[self.idx]

    def adj(self, z, n):
        out = np.zeros(n)
        out[self.idx] = -z
        return out

    def identity(self):
        return np.ones(self.degree)

    def hessian_add(self, hess, s, z):
        if hess.ndim == 1:
            hess[self.idx] += z / s
        else:
            hess[self.idx, self.idx] += z / s

    def scaled(self, s, z, v):
        return (z / s) * v

    def centering(self, s, z, target, ds_aff, dz_aff):
        corr = ds_aff * dz_aff if ds_aff is not None else 0.0
        return (target - s * z - corr) / s

    def max_step(self, v, dv):
        neg = dv < 0
        if not np.any(neg):
            return math.inf
        return float(np.min(-v[neg] / dv[neg]))

    def min_eig(self, v):
        return float(np.min(v)) if v.size else math.inf


class LinearBlock(BoundBlock):
    """Строки h - G x >= 0"""

    def __init__(self, g: np.ndarray, h: np.ndarray):
        self.g = np.asarray(g, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.degree = self.g.shape[0]

    def lin(self, x):
        return self.g @ x

    def adj(self, z, n):
        return self.g.T @ z

    def hessian_add(self, hess, s, z):
        hess += self.g.T @ ((z / s)[:, None] * self.g)


class PsdBlock(ConeBlock):
    """S = H - sum_i x[idx_i] M_i в конусе вещественных симметричных PSD-матриц"""

    def __init__(self, idx: np.ndarray, mats: np.ndarray, h: np.ndarray):
        self.idx = np.asarray(idx, dtype=int)
        self.mats = np.asarray(mats, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.size = self.h.shape[0]
        self.degree = self.size

    def lin(self, x):
        if not len(self.idx):
            return np.zeros_like(self.h)
        return np.tensordot(x[self.idx], self.mats, axes=1)

    def adj(self, z, n):
        out = np.zeros(n)
        if len(self.idx):
            np.add.at(out, self.idx, self.mats.reshape(len(self.idx), -1) @ z.reshape(-1))
        return out

    def identity(self):
        return np.eye(self.size)

    @staticmethod
    def _inv(s):
        try:
            factor = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
            inv = scipy.linalg.cho_solve(factor, np.eye(s.shape[0]), check_finite=False)
        except np.linalg.LinAlgError:
            inv = np.linalg.pinv(s, hermitian=True)
        return 0.5 * (inv + inv.T)

    def hessian_add(self, hess, s, z):
        if not len(self.idx):
            return
        k = len(self.idx)
        s_inv = self._inv(s)
        right = np.matmul(np.matmul(s_inv, self.mats), z)
        # H_ij = Tr[M_i S^-1 M_j Z]
        block = self.mats.reshape(k, -1) @ np.swapaxes(right, 1, 2).reshape(k, -1).T
        block = 0.5 * (block + block.T)
        np.add.at(hess, (self.idx[:, None], self.idx[None, :]), block)

    def scaled(self, s, z, v):
        m = self._inv(s) @ v @ z
        return 0.5 * (m + m.T)

    def centering(self, s, z, target, ds_aff, dz_aff):
        s_inv = self._inv(s)
        m = target * s_inv - z
        if ds_aff is not None:
            m = m - s_inv @ ds_aff @ dz_aff
        return 0.5 * (m + m.T)

    def max_step(self, v, dv):
        try:
            chol = np.linalg.cholesky(v)
        except np.linalg.LinAlgError:
            return 0.0
        half = scipy.linalg.solve_triangular(chol, dv, lower=True, check_finite=False)
        scaled = scipy.linalg.solve_triangular(chol, half.T, lower=True, check_finite=False)
        lam = float(scipy.linalg.eigvalsh(0.5 * (scaled + scaled.T))[0])
        return math.inf if lam >= 0 else -1.0 / lam

    def min_eig(self, v):
        return float(scipy.linalg.eigvalsh(0.5 * (v + v.T))[0]) if v.size else math.inf


# ========== СИСТЕМА НЬЮТОНА ==========

class NewtonSystem:
    """
    Факторизация KKT-системы [[H, A^T], [A, 0]] через дополнение Шура.

    При вырожденной H используется H + A^T A (эквивалентная система), а если
    и она вырождена - сдвиг H + delta I: переменные, не входящие ни в конус,
    ни в цель, остаются на месте.
    """

    SHIFT = 1e-10
    REFINE_STEPS = 3

    def __init__(self, hess: np.ndarray, a: np.ndarray):
        self.a = a
        self.p = a.shape[0]
        self.hess = hess
        self.regularized = False
        self.shifted = False
        self.diagonal = hess.ndim == 1
        if self.diagonal and np.all(hess > 0):
            self.hinv = 1.0 / hess
        else:
            dense = np.diag(hess) if self.diagonal else hess
            self.diagonal = False
            try:
                self.chol = scipy.linalg.cho_factor(dense, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                self.chol = self._fallback(dense, a)
        if self.p:
            schur = a @ self._hsolve(a.T)
            try:
                self.schur = scipy.linalg.cho_factor(0.5 * (schur + schur.T), lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise NumericalBreakdown(f"Дополнение Шура вырождено: {exc}")

    def _fallback(self, dense: np.ndarray, a: np.ndarray):
        if self.p:
            try:
                factor = scipy.linalg.cho_factor(dense + a.T @ a, lower=True, check_finite=False)
                self.regularized = True
                return factor
            except np.linalg.LinAlgError:
                pass
        delta = self.SHIFT * max(1.0, float(np.max(np.abs(np.diag(dense)))) if dense.size else 1.0)
        try:
            factor = scipy.linalg.cho_factor(dense + delta * np.eye(dense.shape[0]), lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown(f"Матрица Гессе вырождена: {exc}")
        self.shifted = True
        return factor

    def _hsolve(self, rhs: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return self.hinv[:, None] * rhs if rhs.ndim == 2 else self.hinv * rhs
        return scipy.linalg.cho_solve(self.chol, rhs, check_finite=False)

    def _solve_once(self, g1: np.ndarray, ry: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self.regularized:
            g1 = g1 + self.a.T @ ry
        if not self.p:
            return self._hsolve(g1), np.zeros(0)
        t = self._hsolve(g1)
        dy = scipy.linalg.cho_solve(self.schur, self.a @ t - ry, check_finite=False)
        dx = self._hsolve(g1 - self.a.T @ dy)
        return dx, dy

    def residual(self, g1: np.ndarray, ry: np.ndarray, dx: np.ndarray, dy: np.ndarray):
        """Невязка исходной (без сдвига) системы H dx + A^T dy = g1, A dx = ry"""
        hdx = self.hess * dx if self.hess.ndim == 1 else self.hess @ dx
        return g1 - hdx - self.a.T @ dy, ry - self.a @ dx

    def solve(self, g1: np.ndarray, ry: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Решение с итеративным уточнением по исходной матрице"""
        dx, dy = self._solve_once(g1, ry)
        if self.diagonal:
            return dx, dy
        r1, r2 = self.residual(g1, ry, dx, dy)
        size = _norm([r1, r2])
        for _ in range(self.REFINE_STEPS):
            if size <= 1e-15 * max(1.0, _norm([g1, ry])):
                break
            ex, ey = self._solve_once(r1, r2)
            nx, ny = dx + ex, dy + ey
            n1, n2 = self.residual(g1, ry, nx, ny)
            new_size = _norm([n1, n2])
            if not new_size < size:
                break
            dx, dy, r1, r2, size = nx, ny, n1, n2, new_size
        return dx, dy


def _kkt_least_squares(blocks: Sequence[ConeBlock], a: np.ndarray, n: int,
                       rhs_x: np.ndarray, rhs_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Запасной путь для стартовой точки: полная KKT-система методом наименьших квадратов"""
    hess = np.zeros((n, n))
    for blk in blocks:
        e = blk.identity()
        blk.hessian_add(hess, e, e)
    p = a.shape[0]
    kkt = np.block([[hess, a.T], [a, np.zeros((p, p))]])
    sol = np.linalg.lstsq(kkt, np.concatenate([rhs_x, rhs_y]), rcond=None)[0]
    return sol[:n], sol[n:]


# ========== ОСНОВНОЙ ЦИКЛ ==========

def _norm(parts: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(p * p)) for p in parts)) if parts else 0.0


def solve_cone_program(c: np.ndarray, blocks: List[ConeBlock], a: np.ndarray, b: np.ndarray,
                       settings: KernelSettings, label: str = "problem") -> KernelResult:
    """
    Решает конусную программу прямо-двойственным методом.

    Args:
        c: вектор цели длины n
        blocks: блоки конуса
        a, b: линейные равенства A x = b (строки уже линейно независимы)
        settings: допуски и лимит итераций
        label: имя задачи для логов

    Returns:
        KernelResult со статусом и последней точкой
    """
    n = c.shape[0]
    p = a.shape[0]
    degree = sum(blk.degree for blk in blocks)
    diag_mode = all(type(blk) is BoundBlock for blk in blocks)

    if degree == 0:
        return _solve_equality_only(c, a, b, label)

    # ---------- стартовая точка ----------
    rhs_h = sum((blk.adj(blk.h, n) for blk in blocks), np.zeros(n))
    try:
        hess0 = np.zeros(n) if diag_mode else np.zeros((n, n))
        for blk in blocks:
            e = blk.identity()
            blk.hessian_add(hess0, e, e)
        system0 = NewtonSystem(hess0, a)
        x, _ = system0.solve(rhs_h, b)
        u, y = system0.solve(-c, np.zeros(p))
    except NumericalBreakdown:
        logger.debug(f"[{label}] стартовая KKT-система вырождена, используется lstsq")
        x, _ = _kkt_least_squares(blocks, a, n, rhs_h, b)
        u, y = _kkt_least_squares(blocks, a, n, -c, np.zeros(p))

    s = [blk.h - blk.lin(x) for blk in blocks]
    z = [blk.lin(u) for blk in blocks]
    nrms, nrmz = _norm(s), _norm(z)
    ts = max(-blk.min_eig(sk) for blk, sk in zip(blocks, s))
    if ts >= -1e-8 * max(nrms, 1.0):
        s = [blk.shift(sk, 1.0 + ts) for blk, sk in zip(blocks, s)]
    tz = max(-blk.min_eig(zk) for blk, zk in zip(blocks, z))
    if tz >= -1e-8 * max(nrmz, 1.0):
        z = [blk.shift(zk, 1.0 + tz) for blk, zk in zip(blocks, z)]

    resx0 = max(1.0, float(np.linalg.norm(c)))
    resy0 = max(1.0, float(np.linalg.norm(b)))
    resz0 = max(1.0, _norm([blk.h for blk in blocks]))

    status = KernelStatus.MAX_ITER
    stalls = 0
    pcost = dcost = gap = pres = dres = math.nan
    iteration = 0

    for iteration in range(settings.maxiters + 1):
        # ---------- невязки ----------
        rx = -(sum((blk.adj(zk, n) for blk, zk in zip(blocks, z)), np.zeros(n)) + a.T @ y + c)
        ry = b - a @ x
        rz = [blk.h - blk.lin(x) - sk for blk, sk in zip(blocks, s)]

        pcost = float(c @ x)
        hz = sum(blk.inner(blk.h, zk) for blk, zk in zip(blocks, z))
        dcost = -hz - float(b @ y)
        gap = sum(blk.inner(sk, zk) for blk, sk, zk in zip(blocks, s, z))
        pres = max(float(np.linalg.norm(ry)) / resy0, _norm(rz) / resz0)
        dres = float(np.linalg.norm(rx)) / resx0
        if pcost < 0:
            relgap = gap / -pcost
        elif dcost > 0:
            relgap = gap / dcost
        else:
            relgap = math.inf

        logger.debug(
            f"[{label}] it={iteration:3d} pcost={pcost: .9e} dcost={dcost: .9e} "
            f"gap={gap:.2e} pres={pres:.2e} dres={dres:.2e}"
        )

        if pres <= settings.feastol and dres <= settings.feastol and (
                gap <= settings.abstol or relgap <= settings.reltol):
            status = KernelStatus.OPTIMAL
            break

        # ---------- сертификаты несовместности ----------
        dual_ray = hz + float(b @ y)
        if dual_ray < 0:
            ray_res = float(np.linalg.norm(c + rx)) / max(1.0, float(np.linalg.norm(c)))
            if ray_res / -dual_ray <= settings.certificate_tol:
                status = KernelStatus.PRIMAL_INFEASIBLE
                break
        if pcost < 0:
            ray_res = max(_norm([blk.h - r for blk, r in zip(blocks, rz)]) / resz0,
                          float(np.linalg.norm(b - ry)) / resy0)
            if ray_res / -pcost <= settings.certificate_tol:
                status = KernelStatus.DUAL_INFEASIBLE
                break

        if iteration == settings.maxiters:
            break

        mu = gap / degree

        # ---------- система Ньютона ----------
        hess = np.zeros(n) if diag_mode else np.zeros((n, n))
        for blk, sk, zk in zip(blocks, s, z):
            blk.hessian_add(hess, sk, zk)
        try:
            system = NewtonSystem(hess, a)
        except NumericalBreakdown as exc:
            logger.debug(f"[{label}] вырожденная система на итерации {iteration}: {exc}")
            status = KernelStatus.STALLED
            break

        wrz = [blk.scaled(sk, zk, r) for blk, sk, zk, r in zip(blocks, s, z, rz)]
        g1_base = rx + sum((blk.adj(w, n) for blk, w in zip(blocks, wrz)), np.zeros(n))

        def newton(q: List[np.ndarray]):
            g1 = g1_base - sum((blk.adj(qk, n) for blk, qk in zip(blocks, q)), np.zeros(n))
            dx, dy = system.solve(g1, ry)
            ds = [r - blk.lin(dx) for blk, r in zip(blocks, rz)]
            dz = [qk - blk.scaled(sk, zk, dsk) for blk, sk, zk, qk, dsk in zip(blocks, s, z, q, ds)]
            return dx, dy, ds, dz

        def steps(ds, dz):
            ap = min(blk.max_step(sk, dsk) for blk, sk, dsk in zip(blocks, s, ds))
            ad = min(blk.max_step(zk, dzk) for blk, zk, dzk in zip(blocks, z, dz))
            return ap, ad

        # предиктор
        q_aff = [blk.centering(sk, zk, 0.0, None, None) for blk, sk, zk in zip(blocks, s, z)]
        dx_a, dy_a, ds_a, dz_a = newton(q_aff)
        ap, ad = steps(ds_a, dz_a)
        ap, ad = min(1.0, ap), min(1.0, ad)
        gap_aff = sum(blk.inner(sk + ap * dsk, zk + ad * dzk)
                      for blk, sk, zk, dsk, dzk in zip(blocks, s, z, ds_a, dz_a))
        sigma = min(1.0, max(0.0, (gap_aff / gap) ** 3)) if gap > 0 else 0.0

        # корректор
        q = [blk.centering(sk, zk, sigma * mu, dsa, dza)
             for blk, sk, zk, dsa, dza in zip(blocks, s, z, ds_a, dz_a)]
        dx, dy, ds, dz = newton(q)
        ap, ad = steps(ds, dz)
        ap = min(1.0, settings.step * ap)
        ad = min(1.0, settings.step * ad)

        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
            logger.debug(f"[{label}] нечисловое направление на итерации {iteration}")
            status = KernelStatus.STALLED
            break

        x = x + ap * dx
        s = [sk + ap * dsk for sk, dsk in zip(s, ds)]
        y = y + ad * dy
        z = [zk + ad * dzk for zk, dzk in zip(z, dz)]

        if ap < settings.minstep and ad < settings.minstep:
            stalls += 1
            if stalls >= 3:
                status = KernelStatus.STALLED
                break
        else:
            stalls = 0

    if status in (KernelStatus.MAX_ITER, KernelStatus.STALLED) and dres > settings.feastol:
        polished = _polish_dual(c, blocks, a, b, y, s, z, settings, label)
        if polished is not None and polished[2] < dres:
            y, z, dres, dcost, gap = polished

    result = KernelResult(status=status, x=x, y=y, s=s, z=z, pcost=pcost, dcost=dcost,
                          gap=gap, pres=pres, dres=dres, iterations=iteration)
    if status in (KernelStatus.MAX_ITER, KernelStatus.STALLED):
        if (pres <= settings.accept_feastol and dres <= settings.accept_feastol
                and gap <= settings.accept_gaptol and abs(pcost - dcost) <= settings.accept_gaptol):
            logger.warning(
                f"⚠️ [{label}] остановка ({status.value}) принята как оптимум: "
                f"pres={pres:.1e} dres={dres:.1e} gap={gap:.1e}"
            )
            result.status = KernelStatus.OPTIMAL
            result.accepted = True
    return result


def _polish_dual(c: np.ndarray, blocks: List[ConeBlock], a: np.ndarray, b: np.ndarray,
                 y: np.ndarray, s: List[np.ndarray], z: List[np.ndarray],
                 settings: KernelSettings, label: str):
    """
    Шаг только по двойственным переменным: H dx + A^T dy = r_x, A dx = 0,
    dz = W(G dx). После полного шага G^T z + A^T y + c = 0.

    Returns:
        (y, z, dres, dcost, gap) или None, если система вырождена
    """
    n = c.shape[0]
    diag_mode = all(type(blk) is BoundBlock for blk in blocks)
    hess = np.zeros(n) if diag_mode else np.zeros((n, n))
    for blk, sk, zk in zip(blocks, s, z):
        blk.hessian_add(hess, sk, zk)
    try:
        system = NewtonSystem(hess, a)
    except NumericalBreakdown:
        return None
    rx = -(sum((blk.adj(zk, n) for blk, zk in zip(blocks, z)), np.zeros(n)) + a.T @ y + c)
    dx, dy = system.solve(rx, np.zeros(a.shape[0]))
    dz = [blk.scaled(sk, zk, blk.lin(dx)) for blk, sk, zk in zip(blocks, s, z)]
    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dy))):
        return None
    reach = min(blk.max_step(zk, dzk) for blk, zk, dzk in zip(blocks, z, dz))
    alpha = 1.0 if reach * settings.step >= 1.0 else settings.step * reach
    y = y + alpha * dy
    z = [zk + alpha * dzk for zk, dzk in zip(z, dz)]
    rx = -(sum((blk.adj(zk, n) for blk, zk in zip(blocks, z)), np.zeros(n)) + a.T @ y + c)
    dres = float(np.linalg.norm(rx)) / max(1.0, float(np.linalg.norm(c)))
    dcost = -sum(blk.inner(blk.h, zk) for blk, zk in zip(blocks, z)) - float(b @ y)
    gap = sum(blk.inner(sk, zk) for blk, sk, zk in zip(blocks, s, z))
    logger.debug(f"[{label}] двойственная поправка: шаг {alpha:.3f}, dres={dres:.2e}")
    return y, z, dres, dcost, gap


def _solve_equality_only(c: np.ndarray, a: np.ndarray, b: np.ndarray, label: str) -> KernelResult:
    """Задача без конусов: min c^T x при A x = b ограничена, только если c в образе A^T"""
    x = np.linalg.lstsq(a, b, rcond=None)[0] if a.size else np.zeros_like(c)
    y = -np.linalg.lstsq(a.T, c, rcond=None)[0] if a.size else np.zeros(0)
    dres = float(np.linalg.norm(a.T @ y + c)) / max(1.0, float(np.linalg.norm(c)))
    pres = float(np.linalg.norm(a @ x - b)) / max(1.0, float(np.linalg.norm(b))) if a.size else 0.0
    status = KernelStatus.OPTIMAL if dres <= 1e-9 else KernelStatus.DUAL_INFEASIBLE
    if pres > 1e-9:
        status = KernelStatus.PRIMAL_INFEASIBLE
    pcost = float(c @ x)
    dcost = -float(b @ y)
    logger.debug(f"[{label}] задача без конусов: {status.value}")
    return KernelResult(status=status, x=x, y=y, s=[], z=[], pcost=pcost, dcost=dcost,
                        gap=0.0, pres=pres, dres=dres, iterations=0)
