"""
SOFIA 引擎 - 加性 Holt-Winters 与鲁棒统计量

- huber_psi / biweight_rho：预清洗用的 Huber Ψ 截断函数与 biweight ρ 函数
- hw_update / hw_forecast：向量化（按秩分量逐列）的平滑递推与 h 步预测
- hw_fit：对时间因子矩阵逐列拟合 α、β、γ 与初始分量，目标为一步预测误差平方和

季节分量用长度为 m 的环形缓冲表示：seasonal[0] 是最旧的 s_{t-m+1}，
seasonal[m-1] 是最新的 s_t。
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionError, InputError, InsufficientHistoryError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# 多起点：在 [0,1]^3 网格上挑 SSE 最小的若干点作为 L-BFGS-B 起点
_GRID = (0.05, 0.35, 0.65, 0.95)
_N_STARTS = 4


def _as_output(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def huber_psi(x: ArrayLike, k: float) -> ArrayLike:
    """Huber Ψ：|x| < k 时原样返回，否则截断为 sign(x)·k。"""
    return _as_output(np.clip(np.asarray(x, dtype=float), -k, k))


def biweight_rho(x: ArrayLike, k: float, c_k: float) -> ArrayLike:
    """biweight ρ：|x| ≤ k 时 c_k(1-(1-(x/k)²)³)，否则饱和为 c_k。"""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        inner = 1.0 - np.square(x / k)
        value = np.where(np.abs(x) <= k, c_k * (1.0 - inner ** 3), c_k)
    return _as_output(value)


@dataclass(frozen=True)
class HwParams:
    """各秩分量的平滑参数 α、β、γ，取值均在 [0,1]。"""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        vectors = [np.atleast_1d(np.array(v, dtype=float)) for v in (self.alpha, self.beta, self.gamma)]
        if len({v.shape for v in vectors}) != 1 or vectors[0].ndim != 1:
            raise DimensionError("α、β、γ 必须是等长向量")
        for name, v in zip(("alpha", "beta", "gamma"), vectors):
            if np.any(v < 0) or np.any(v > 1) or not np.all(np.isfinite(v)):
                raise InputError(f"{name} 必须落在 [0,1]")
        object.__setattr__(self, "alpha", vectors[0])
        object.__setattr__(self, "beta", vectors[1])
        object.__setattr__(self, "gamma", vectors[2])

    @classmethod
    def uniform(cls, rank: int, alpha: float, beta: float, gamma: float) -> "HwParams":
        return cls(np.full(rank, alpha), np.full(rank, beta), np.full(rank, gamma))

    @property
    def rank(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class HwState:
    """水平 l_t、趋势 b_t、最近 m 个季节分量与平滑参数。"""

    level: np.ndarray
    trend: np.ndarray
    seasonal: np.ndarray
    params: HwParams

    def __post_init__(self):
        level = np.atleast_1d(np.array(self.level, dtype=float))
        trend = np.atleast_1d(np.array(self.trend, dtype=float))
        seasonal = np.array(self.seasonal, dtype=float)
        if seasonal.ndim == 1:
            seasonal = seasonal.reshape(-1, 1)
        rank = self.params.rank
        if level.shape != (rank,) or trend.shape != (rank,) or seasonal.ndim != 2 or seasonal.shape[1] != rank:
            raise DimensionError("HW 状态各分量长度必须等于秩 R")
        if seasonal.shape[0] < 2:
            raise InputError(f"季节周期必须 ≥ 2，当前为 {seasonal.shape[0]}")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "trend", trend)
        object.__setattr__(self, "seasonal", seasonal)

    @property
    def period(self) -> int:
        return self.seasonal.shape[0]

    @property
    def rank(self) -> int:
        return self.level.size


def hw_update(state: HwState, y: np.ndarray) -> HwState:
    """用新观测向量 y 推进一步平滑递推，返回新状态（输入状态不变）。"""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != state.rank:
        raise DimensionError(f"观测向量长度 {y.size} 与秩 {state.rank} 不符")
    p = state.params
    s_old = state.seasonal[0]
    base = state.level + state.trend
    level = p.alpha * (y - s_old) + (1.0 - p.alpha) * base
    trend = p.beta * (level - state.level) + (1.0 - p.beta) * state.trend
    season = p.gamma * (y - base) + (1.0 - p.gamma) * s_old
    seasonal = np.vstack([state.seasonal[1:], season])
    return HwState(level=level, trend=trend, seasonal=seasonal, params=p)


def hw_forecast(state: HwState, h: int) -> np.ndarray:
    """h 步预测 l_t + h·b_t + s_{t+h-m(⌊(h-1)/m⌋+1)}，季节项总落在最近一个季节内。"""
    if h < 1:
        raise InputError(f"预测步数必须 ≥ 1，当前为 {h}")
    return state.level + h * state.trend + state.seasonal[(h - 1) % state.period]


def _smooth(
    y: np.ndarray,
    alpha: ArrayLike,
    beta: ArrayLike,
    gamma: ArrayLike,
    level: np.ndarray,
    trend: np.ndarray,
    seasonal: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """对 y（T×K，K 条独立序列）跑平滑递推，返回一步误差与末状态。"""
    level = np.array(level, dtype=float)
    trend = np.array(trend, dtype=float)
    ring = np.array(seasonal, dtype=float)
    m = ring.shape[0]
    errors = np.empty_like(y)
    for t in range(y.shape[0]):
        j = t % m
        s_old = ring[j].copy()
        base = level + trend
        errors[t] = y[t] - base - s_old
        new_level = alpha * (y[t] - s_old) + (1.0 - alpha) * base
        ring[j] = gamma * (y[t] - base) + (1.0 - gamma) * s_old
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        level = new_level
    ring = np.roll(ring, -(y.shape[0] % m), axis=0)
    return errors, level, trend, ring


def hw_sse(
    series: np.ndarray,
    m: int,
    alpha: float,
    beta: float,
    gamma: float,
    level0: float,
    trend0: float,
    seasonal0: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """单列一步预测误差平方和 Σe_t²，同时返回误差向量。"""
    y = np.asarray(series, dtype=float).reshape(-1, 1)
    seasonal0 = np.asarray(seasonal0, dtype=float).reshape(m, 1)
    errors, *_ = _smooth(y, alpha, beta, gamma, np.array([level0]), np.array([trend0]), seasonal0)
    errors = errors[:, 0]
    return float(errors @ errors), errors


def initial_components(series: np.ndarray, m: int) -> Tuple[float, float, np.ndarray]:
    """加性模型的常规初值：水平取首季均值，趋势取两季均值差 / m，季节取首季去均值。"""
    y = np.asarray(series, dtype=float).ravel()
    first = y[:m]
    second = y[m:2 * m]
    level = float(first.mean())
    trend = float((second.mean() - first.mean()) / m)
    return level, trend, first - level


def _profile(y: np.ndarray, m: int, params: np.ndarray, start: np.ndarray) -> Tuple[float, np.ndarray]:
    """固定 (α,β,γ) 时误差关于初始状态是仿射的：解最小二乘得到最优初始状态。

    start 为 [l0, b0, s0_1..s0_m]；返回 (SSE, 最优初始状态)。
    """
    alpha, beta, gamma = (float(v) for v in params)
    n_state = m + 2
    batch = np.zeros((y.size, n_state + 1))
    batch[:, 0] = y
    # 第 0 列是数据 + 起点状态，其余列是零输入下的单位初始状态响应
    level0 = np.zeros(n_state + 1)
    trend0 = np.zeros(n_state + 1)
    seasonal0 = np.zeros((m, n_state + 1))
    level0[0], trend0[0], seasonal0[:, 0] = start[0], start[1], start[2:]
    level0[1] = 1.0
    trend0[2] = 1.0
    seasonal0[np.arange(m), np.arange(3, n_state + 1)] = 1.0
    errors, *_ = _smooth(batch, alpha, beta, gamma, level0, trend0, seasonal0)
    base, response = errors[:, 0], errors[:, 1:]
    delta, *_ = np.linalg.lstsq(response, -base, rcond=None)
    residual = base + response @ delta
    return float(residual @ residual), start + delta


def _fit_column(y: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray, float]:
    level, trend, season = initial_components(y, m)
    start = np.concatenate([[level, trend], season])

    def objective(p: np.ndarray) -> float:
        return _profile(y, m, np.clip(p, 0.0, 1.0), start)[0]

    scored = sorted(
        (objective(np.array(p)), p) for p in itertools.product(_GRID, repeat=3)
    )
    best = None
    for _, p0 in scored[:_N_STARTS]:
        result = minimize(objective, np.array(p0), method="L-BFGS-B", bounds=[(0.0, 1.0)] * 3)
        if best is None or result.fun < best.fun:
            best = result
    if not best.success:
        logger.warning(f"Sofia: HW 参数优化未收敛（{best.message}），采用当前最优点 SSE={best.fun:.4g}")
    params = np.clip(best.x, 0.0, 1.0)
    sse, state0 = _profile(y, m, params, start)
    return params, state0, sse


def hw_fit(series: np.ndarray, m: int) -> Tuple[HwState, HwParams]:
    """逐列拟合时间因子矩阵（t_i×R），返回推进到 t_i 时刻的 HW 状态与参数。"""
    y = np.asarray(series, dtype=float)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if m < 2:
        raise InputError(f"季节周期必须 ≥ 2，当前为 {m}")
    if y.shape[0] < 3 * m:
        raise InsufficientHistoryError(f"HW 拟合至少需要 3 个季节（{3 * m} 步），实际 {y.shape[0]} 步")
    if not np.all(np.isfinite(y)):
        raise InputError("HW 拟合序列含非有限值")

    rank = y.shape[1]
    alphas, betas, gammas = np.empty(rank), np.empty(rank), np.empty(rank)
    levels, trends = np.empty(rank), np.empty(rank)
    seasonal = np.empty((m, rank))
    for r in range(rank):
        params, state0, sse = _fit_column(y[:, r], m)
        alphas[r], betas[r], gammas[r] = params
        _, level, trend, ring = _smooth(
            y[:, r:r + 1], params[0], params[1], params[2],
            state0[:1], state0[1:2], state0[2:].reshape(m, 1),
        )
        levels[r], trends[r], seasonal[:, r] = level[0], trend[0], ring[:, 0]
        logger.debug(
            f"Sofia: HW 第 {r} 列 α={params[0]:.3g} β={params[1]:.3g} γ={params[2]:.3g} SSE={sse:.4g}"
        )
    hw_params = HwParams(alphas, betas, gammas)
    return HwState(level=levels, trend=trends, seasonal=seasonal, params=hw_params), hw_params
