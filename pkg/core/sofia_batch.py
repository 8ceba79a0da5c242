"""
SOFIA 引擎 - 初始化阶段

在前 t_i = 3m 个切片拼成的批量张量上求解带时间 / 季节平滑正则的 CP 分解，
外层循环交替执行平滑正则 ALS 与对残差的逐元素软阈值，并逐轮衰减 λ3。

行更新约定：
- 非时间模态：同一模态内各行互不依赖，按批一次性求解（与逐行顺序扫掠等价）；
  每个模态扫完后把列范数转移到时间矩阵并归一化。
- 时间模态：按下标升序逐行 Gauss-Seidel 更新，邻居行读取当前值；
  时间扫掠之后不再归一化。
- B 病态时加 1e-9·trace(B)/R 的岭后重解；B 全零（该行无观测）时保留原行。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.configs import BatchConfig

from .errors import DimensionError, InputError, InsufficientHistoryError
from .tensor_core import (
    FactorSet,
    check_finite,
    khatri_rao_chain,
    kruskal_reconstruct,
    masked_frobenius,
    mode_unfold,
    transfer_column_norms,
)

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e12
_RIDGE_SCALE = 1e-9


@dataclass(frozen=True)
class AlsOutcome:
    completed: np.ndarray
    factors: FactorSet
    fitness: float
    sweeps: int


@dataclass(frozen=True)
class BatchResult:
    """初始化结果：补全张量、因子、离群张量（未观测处为 0）与收敛信息。"""

    completed: np.ndarray
    factors: FactorSet
    outliers: np.ndarray
    iterations: int
    fitness: float
    lambda3: float
    als_sweeps: int


def soft_threshold(x, lam: float):
    """逐元素软阈值 sign(x)·max(|x|-λ, 0)。"""
    if lam < 0:
        raise InputError(f"软阈值必须非负，当前为 {lam}")
    x = np.asarray(x, dtype=float)
    value = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return float(value) if value.ndim == 0 else value


def lambda3_schedule(lambda3_init: float, decay: float, floor_divisor: float, passes: int) -> float:
    """p 轮外层循环后的工作 λ3：max(λ3_init·d^p, λ3_init/除数)。"""
    lam = lambda3_init
    floor = lambda3_init / floor_divisor
    for _ in range(passes):
        lam = max(decay * lam, floor)
    return lam


def _smoothness_penalty(temporal: np.ndarray, lambda1: float, lambda2: float, period: int) -> float:
    lag1 = np.sum(np.square(temporal[1:] - temporal[:-1]))
    lag_m = np.sum(np.square(temporal[period:] - temporal[:-period])) if temporal.shape[0] > period else 0.0
    return float(lambda1 * lag1 + lambda2 * lag_m)


def batch_objective(
    y: np.ndarray,
    mask: np.ndarray,
    outliers: np.ndarray,
    factors: FactorSet,
    lambda1: float,
    lambda2: float,
    lambda3: float,
    period: int,
) -> float:
    """批量目标：‖Ω∘(Y-O-X̂)‖² + λ1‖L_1 U(N)‖² + λ2‖L_m U(N)‖² + λ3‖O‖_1。"""
    mask = np.asarray(mask, dtype=bool)
    residual = np.where(mask, np.asarray(y, dtype=float) - outliers - kruskal_reconstruct(factors), 0.0)
    return float(
        np.sum(np.square(residual))
        + _smoothness_penalty(factors.temporal, lambda1, lambda2, period)
        + lambda3 * np.sum(np.abs(outliers))
    )


def _normal_equations(
    matrices: Sequence[np.ndarray], y_star: np.ndarray, mask: np.ndarray, n: int
) -> Tuple[np.ndarray, np.ndarray]:
    """模态 n 所有行的 B_i = Σ h h^T 与 c_i = Σ y* h（只累加观测元素）。"""
    design = khatri_rao_chain(matrices, skip=n)
    observed = mode_unfold(mask, n).astype(float)
    data = mode_unfold(np.where(mask, y_star, 0.0), n)
    gram = np.einsum("ij,jr,js->irs", observed, design, design)
    return gram, data @ design


def _solve_rows(gram: np.ndarray, rhs: np.ndarray, previous: np.ndarray) -> np.ndarray:
    """批量求解 gram_i u_i = rhs_i；gram 全零的行保留 previous。"""
    rank = gram.shape[-1]
    out = np.array(previous, dtype=float)
    trace = np.trace(gram, axis1=1, axis2=2)
    active = trace > 0
    skipped = int(np.count_nonzero(~active))
    if skipped:
        logger.warning(f"Sofia: {skipped} 行没有观测，保留原值")
    if not np.any(active):
        return out
    systems = gram[active].copy()
    cond = np.linalg.cond(systems)
    bad = ~np.isfinite(cond) | (cond > _COND_LIMIT)
    if np.any(bad):
        ridge = _RIDGE_SCALE * trace[active][bad] / rank
        systems[bad] += ridge[:, None, None] * np.eye(rank)
        logger.warning(f"Sofia: {int(bad.sum())} 行正规方程病态，已加岭重解")
    out[active] = np.linalg.solve(systems, rhs[active][..., None])[..., 0]
    return out


def _smoothness_terms(
    i: int, temporal: np.ndarray, lambda1: float, lambda2: float, period: int
) -> Tuple[float, np.ndarray]:
    """第 i 个时间行的惩罚系数与邻居加权和（首尾与前后一个季节内的行邻居较少）。"""
    coef = 0.0
    neighbors = np.zeros(temporal.shape[1])
    length = temporal.shape[0]
    for lag, weight in ((1, lambda1), (period, lambda2)):
        if weight == 0:
            continue
        for j in (i - lag, i + lag):
            if 0 <= j < length:
                coef += weight
                neighbors += weight * temporal[j]
    return coef, neighbors


def _solve_temporal_row(
    i: int,
    gram: np.ndarray,
    rhs: np.ndarray,
    temporal: np.ndarray,
    lambda1: float,
    lambda2: float,
    period: int,
) -> np.ndarray:
    coef, neighbors = _smoothness_terms(i, temporal, lambda1, lambda2, period)
    system = gram + coef * np.eye(gram.shape[0])
    return _solve_rows(system[None], (rhs + neighbors)[None], temporal[i:i + 1])[0]


def _as_matrices(factors: FactorSet | Sequence[np.ndarray]) -> List[np.ndarray]:
    mats = factors.matrices if isinstance(factors, FactorSet) else factors
    return [np.array(m, dtype=float) for m in mats]


def nontemporal_row_update(
    i: int,
    n: int,
    factors: FactorSet | Sequence[np.ndarray],
    y_star: np.ndarray,
    mask: np.ndarray,
) -> Optional[np.ndarray]:
    """非时间模态 n 第 i 行的最小二乘解 B⁻¹c；该行无观测时返回 None（调用方保留原行）。"""
    mats = _as_matrices(factors)
    if not 0 <= n < len(mats) - 1:
        raise DimensionError(f"模态 {n} 不是非时间模态")
    mask = np.asarray(mask, dtype=bool)
    if not np.any(np.take(mask, i, axis=n)):
        return None
    gram, rhs = _normal_equations(mats, y_star, mask, n)
    return _solve_rows(gram[i:i + 1], rhs[i:i + 1], mats[n][i:i + 1])[0]


def temporal_row_update(
    i: int,
    factors: FactorSet | Sequence[np.ndarray],
    y_star: np.ndarray,
    mask: np.ndarray,
    lambda1: float,
    lambda2: float,
    period: int,
) -> Optional[np.ndarray]:
    """时间模态第 i 行的平滑正则解 (B + 系数·I)⁻¹(c + 邻居加权和)。

    无观测且无平滑惩罚时返回 None。
    """
    mats = _as_matrices(factors)
    n = len(mats) - 1
    mask = np.asarray(mask, dtype=bool)
    gram, rhs = _normal_equations(mats, y_star, mask, n)
    coef, _ = _smoothness_terms(i, mats[n], lambda1, lambda2, period)
    if coef == 0 and not np.any(np.take(mask, i, axis=n)):
        return None
    return _solve_temporal_row(i, gram[i], rhs[i], mats[n], lambda1, lambda2, period)


def _extrapolate(
    mats: List[np.ndarray], previous: List[np.ndarray], jump: float
) -> List[np.ndarray]:
    """沿上一轮扫掠的变化方向外推 jump 倍，再把非时间列范数转移回时间矩阵。"""
    moved = [m + jump * (m - p) for m, p in zip(mats, previous)]
    for n in range(len(moved) - 1):
        transfer_column_norms(moved, n)
    return moved


def _check_batch_inputs(y: np.ndarray, mask: np.ndarray, outliers: np.ndarray, factors: FactorSet) -> None:
    if y.ndim < 2:
        raise InputError("批量张量至少需要一个非时间模态和一个时间模态")
    if mask.shape != y.shape or outliers.shape != y.shape:
        raise DimensionError(f"Y {y.shape}、Ω {mask.shape}、O {outliers.shape} 形状不一致")
    if factors.shape != y.shape:
        raise DimensionError(f"因子形状 {factors.shape} 与张量形状 {y.shape} 不符")
    check_finite("Y", y, mask)
    check_finite("O", outliers)


def sofia_als(
    y: np.ndarray,
    mask: np.ndarray,
    outliers: np.ndarray,
    factors: FactorSet,
    config: BatchConfig,
) -> AlsOutcome:
    """平滑正则 ALS：非时间模态逐个更新并归一化，再逐行更新时间模态，直到拟合度变化 < tol。

    config.line_search 打开时，从第 2 次扫掠起沿本次扫掠的变化方向外推 sweep^(1/3) 倍，
    外推后的掩码目标（残差平方和 + 平滑惩罚）更小才采用。
    """
    y = np.asarray(y, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    outliers = np.asarray(outliers, dtype=float)
    _check_batch_inputs(y, mask, outliers, factors)

    y_star = np.where(mask, y - outliers, 0.0)
    scale = masked_frobenius(y_star, mask)

    def fitness_of(completed: np.ndarray) -> float:
        residual = masked_frobenius(y_star - completed, mask)
        return 1.0 - residual / scale if scale > 0 else 1.0 - residual

    mats = _as_matrices(factors)
    last = len(mats) - 1

    def objective_of(candidate: List[np.ndarray]) -> Tuple[float, np.ndarray]:
        reconstructed = kruskal_reconstruct(candidate)
        residual = np.where(mask, y_star - reconstructed, 0.0)
        penalty = _smoothness_penalty(candidate[last], config.lambda1, config.lambda2, config.period)
        return float(np.sum(np.square(residual))) + penalty, reconstructed

    previous = fitness_of(kruskal_reconstruct(mats))
    completed, fitness, sweep, jumps = None, previous, 0, 0
    for sweep in range(1, config.max_iter + 1):
        before = [m.copy() for m in mats]
        for n in range(last):
            gram, rhs = _normal_equations(mats, y_star, mask, n)
            mats[n] = _solve_rows(gram, rhs, mats[n])
            transfer_column_norms(mats, n)
        gram, rhs = _normal_equations(mats, y_star, mask, last)
        temporal = mats[last]
        for i in range(temporal.shape[0]):
            temporal[i] = _solve_temporal_row(
                i, gram[i], rhs[i], temporal, config.lambda1, config.lambda2, config.period
            )
        current, completed = objective_of(mats)
        if config.line_search and sweep > 1:
            candidate = _extrapolate(mats, before, sweep ** (1.0 / 3.0))
            value, extrapolated = objective_of(candidate)
            if value < current:
                mats, completed = candidate, extrapolated
                jumps += 1
        fitness = fitness_of(completed)
        logger.debug(f"Sofia: ALS 第 {sweep} 次扫掠 fitness={fitness:.6g} 外推采用={jumps}")
        if abs(fitness - previous) < config.tol:
            break
        previous = fitness
    if completed is None:
        completed = kruskal_reconstruct(mats)
    return AlsOutcome(completed=completed, factors=FactorSet(tuple(mats)), fitness=fitness, sweeps=sweep)


def stack_prefix(prefix: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    """把 (子张量, 掩码) 序列沿最后一维拼成批量张量与批量掩码，未观测处置 0。"""
    shapes = {np.shape(values) for values, _ in prefix} | {np.shape(bits) for _, bits in prefix}
    if len(shapes) != 1:
        raise DimensionError(f"切片形状不一致: {sorted(shapes)}")
    mask = np.stack([np.asarray(bits, dtype=bool) for _, bits in prefix], axis=-1)
    y = np.stack([np.asarray(values, dtype=float) for values, _ in prefix], axis=-1)
    return np.where(mask, y, 0.0), mask


def initialize(
    prefix: Sequence[Tuple[np.ndarray, np.ndarray]],
    config: BatchConfig,
    robust: bool = True,
) -> BatchResult:
    """初始化：交替执行 sofia_als 与残差软阈值，λ3 每轮按 d 衰减并以 λ3_init/除数 为下限。

    robust=False 时只跑一次 ALS 且 O ≡ 0（配合 λ1=λ2=0 即普通带掩码 ALS 消融）。
    """
    t_i = config.startup_length
    if len(prefix) < t_i:
        raise InsufficientHistoryError(f"初始化需要 {t_i} 个切片（{config.init_seasons} 个季节），实际 {len(prefix)} 个")
    y, mask = stack_prefix(prefix[:t_i])
    rng = np.random.default_rng(config.seed)
    factors = FactorSet(tuple(rng.random((size, config.rank)) for size in y.shape))
    outliers = np.zeros_like(y)

    if not robust:
        outcome = sofia_als(y, mask, outliers, factors, config)
        logger.info(f"Sofia: 普通 ALS 初始化完成 sweeps={outcome.sweeps} fitness={outcome.fitness:.6g}")
        return BatchResult(
            completed=outcome.completed,
            factors=outcome.factors,
            outliers=outliers,
            iterations=1,
            fitness=outcome.fitness,
            lambda3=config.lambda3,
            als_sweeps=outcome.sweeps,
        )

    floor = config.lambda3 / config.lambda3_floor_divisor
    previous: Optional[np.ndarray] = None
    sweeps = 0
    outer = 0
    outcome = None
    for outer in range(1, config.max_outer_iter + 1):
        lam = lambda3_schedule(config.lambda3, config.decay, config.lambda3_floor_divisor, outer - 1)
        outcome = sofia_als(y, mask, outliers, factors, config)
        factors = outcome.factors
        sweeps += outcome.sweeps
        outliers = np.where(mask, soft_threshold(y - outcome.completed, lam), 0.0)
        if previous is not None:
            base = np.linalg.norm(previous)
            change = np.linalg.norm(previous - outcome.completed)
            change = change / base if base > 0 else change
            logger.debug(f"Sofia: 外层第 {outer} 轮 相对变化={change:.4g} λ3={lam:.4g}")
            # 只在 λ3 到达下限后按相对变化判停
            if lam <= floor and change < config.tol:
                break
        previous = outcome.completed
    lam = lambda3_schedule(config.lambda3, config.decay, config.lambda3_floor_divisor, outer)

    logger.info(
        f"Sofia: 初始化完成 outer={outer} sweeps={sweeps} fitness={outcome.fitness:.6g} "
        f"离群元素={int(np.count_nonzero(outliers))}"
    )
    return BatchResult(
        completed=outcome.completed,
        factors=outcome.factors,
        outliers=outliers,
        iterations=outer,
        fitness=outcome.fitness,
        lambda3=lam,
        als_sweeps=sweeps,
    )
