"""
SOFIA 引擎 - 动态更新阶段

每来一个切片 (Y_t, Ω_t) 依次执行：
    HW 一步预测 → Huber 预清洗估计离群 O_t → biweight 更新误差尺度 Σ̂_t
    → 非时间因子梯度步 → 时间向量梯度步 → HW 分量更新 → 重构 X̂_t

两个梯度步都在同一点 (U_{t-1}, û_{t|t-1}) 求值，残差 𝑅_t 固定在预测点；
所有逐元素运算只触及观测元素，单步代价 O(|Ω_t|·N·R)。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from models.configs import OnlineConfig, RobustConfig

from .errors import ConfigurationError, DimensionError, InputError
from .robust_hw import HwState, biweight_rho, huber_psi, hw_fit, hw_forecast, hw_update
from .sofia_batch import BatchResult
from .tensor_core import kruskal_slice

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StreamState:
    """在线状态：非时间因子、最近 m 个时间向量、HW 状态、误差尺度张量与当前时刻。

    temporal[0] 是 u_{t-m+1}，temporal[-1] 是 u_t。
    """

    nontemporal: Tuple[np.ndarray, ...]
    temporal: np.ndarray
    hw: HwState
    error_scale: np.ndarray
    config: OnlineConfig
    t: int

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.nontemporal)
        temporal = np.array(self.temporal, dtype=float)
        scale = np.array(self.error_scale, dtype=float)
        if not mats or any(m.shape[1] != temporal.shape[1] for m in mats):
            raise DimensionError("非时间因子与时间向量的秩不一致")
        if temporal.shape[0] != self.hw.period:
            raise DimensionError(f"时间环形缓冲长度 {temporal.shape[0]} 与周期 {self.hw.period} 不符")
        if scale.shape != self.slice_shape_of(mats):
            raise DimensionError(f"误差尺度形状 {scale.shape} 与切片形状不符")
        if np.any(scale <= 0):
            raise DimensionError("误差尺度必须严格为正")
        object.__setattr__(self, "nontemporal", mats)
        object.__setattr__(self, "temporal", temporal)
        object.__setattr__(self, "error_scale", scale)

    @staticmethod
    def slice_shape_of(mats: Sequence[np.ndarray]) -> Tuple[int, ...]:
        return tuple(m.shape[0] for m in mats)

    @property
    def slice_shape(self) -> Tuple[int, ...]:
        return self.slice_shape_of(self.nontemporal)

    @property
    def rank(self) -> int:
        return self.temporal.shape[1]

    @property
    def period(self) -> int:
        return self.hw.period


@dataclass(frozen=True)
class StepOutput:
    """单步输出：补全切片 X̂_t、离群估计 O_t（未观测处为 0）与一步预测 Ŷ_{t|t-1}。"""

    imputed: np.ndarray
    outliers: np.ndarray
    one_step_forecast: np.ndarray


def bootstrap_stream(batch: BatchResult, config: OnlineConfig, period: int) -> StreamState:
    """由初始化结果拟合 HW 并构造初始在线状态（Σ̂ 全部置为 λ3/100）。"""
    temporal = batch.factors.temporal
    hw, params = hw_fit(temporal, period)
    logger.info(
        f"Sofia: HW 拟合完成 α={np.round(params.alpha, 3).tolist()} "
        f"β={np.round(params.beta, 3).tolist()} γ={np.round(params.gamma, 3).tolist()}"
    )
    nontemporal = tuple(batch.factors.nontemporal)
    return StreamState(
        nontemporal=nontemporal,
        temporal=temporal[-period:],
        hw=hw,
        error_scale=np.full(StreamState.slice_shape_of(nontemporal), config.sigma_init),
        config=config,
        t=temporal.shape[0],
    )


def forecast_next(state: StreamState) -> Tuple[np.ndarray, np.ndarray]:
    """一步预测：û = l + b + s_{t-m}，Ŷ = ⟦U; û⟧。"""
    u_hat = hw_forecast(state.hw, 1)
    return u_hat, kruskal_slice(state.nontemporal, u_hat)


def forecast_h(state: StreamState, h: int) -> np.ndarray:
    """h 步预测子张量 Ŷ_{t+h|t}。"""
    return kruskal_slice(state.nontemporal, hw_forecast(state.hw, h))


def estimate_outliers(
    y: np.ndarray,
    mask: np.ndarray,
    forecast: np.ndarray,
    error_scale: np.ndarray,
    k: float,
    sigma_floor: float = 1e-12,
) -> np.ndarray:
    """O = r - Ψ(r/Σ̂)·Σ̂，r = Y - Ŷ；未观测处 O = 0。"""
    mask = np.asarray(mask, dtype=bool)
    sigma = np.maximum(error_scale, sigma_floor)
    residual = np.where(mask, np.asarray(y, dtype=float) - forecast, 0.0)
    outliers = residual - huber_psi(residual / sigma, k) * sigma
    return np.where(mask, outliers, 0.0)


def update_error_scale(
    error_scale: np.ndarray,
    y: np.ndarray,
    mask: np.ndarray,
    forecast: np.ndarray,
    robust: RobustConfig,
    sigma_floor: float = 1e-12,
) -> np.ndarray:
    """Σ̂_t² = φ·ρ(r/Σ̂_{t-1})·Σ̂_{t-1}² + (1-φ)·Σ̂_{t-1}²；未观测处沿用旧值。"""
    mask = np.asarray(mask, dtype=bool)
    sigma = np.maximum(error_scale, sigma_floor)
    residual = np.where(mask, np.asarray(y, dtype=float) - forecast, 0.0)
    rho = biweight_rho(residual / sigma, robust.huber_k, robust.biweight_c)
    variance = (robust.phi * rho + (1.0 - robust.phi)) * np.square(sigma)
    return np.maximum(np.where(mask, np.sqrt(variance), error_scale), sigma_floor)


def _observed_rows(nontemporal: Sequence[np.ndarray], index: Tuple[np.ndarray, ...], skip: Optional[int]) -> np.ndarray:
    """观测元素处除 skip 外各模态因子行的 Hadamard 积（|Ω|×R）。"""
    rows = np.ones((index[0].size, nontemporal[0].shape[1]))
    for l, matrix in enumerate(nontemporal):
        if l != skip:
            rows *= matrix[index[l]]
    return rows


def grad_update_nontemporal(
    nontemporal: Sequence[np.ndarray],
    residual: np.ndarray,
    u_hat: np.ndarray,
    mu: float,
    mask: Optional[np.ndarray] = None,
) -> List[np.ndarray]:
    """U(n)_t = U(n)_{t-1} + 2μ·R_(n)·(⊙_{l≠n} U(l)_{t-1})·diag(û)，各模态都在 t-1 时刻的点上求值。"""
    support = np.asarray(mask, dtype=bool) if mask is not None else residual != 0
    index = np.nonzero(support)
    values = np.asarray(residual, dtype=float)[index]
    updated = []
    for n, matrix in enumerate(nontemporal):
        contrib = values[:, None] * _observed_rows(nontemporal, index, skip=n) * u_hat
        gradient = np.zeros_like(matrix, dtype=float)
        np.add.at(gradient, index[n], contrib)
        updated.append(matrix + 2.0 * mu * gradient)
    return updated


def grad_update_temporal(
    u_hat: np.ndarray,
    residual: np.ndarray,
    nontemporal: Sequence[np.ndarray],
    u_prev: np.ndarray,
    u_season: np.ndarray,
    mu: float,
    lambda1: float,
    lambda2: float,
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """u_t = û + 2μ[(⊙U)^T vec(𝑅) + λ1·u_{t-1} + λ2·u_{t-m} - (λ1+λ2)·û]。"""
    support = np.asarray(mask, dtype=bool) if mask is not None else residual != 0
    index = np.nonzero(support)
    values = np.asarray(residual, dtype=float)[index]
    data_term = values @ _observed_rows(nontemporal, index, skip=None)
    return u_hat + 2.0 * mu * (data_term + lambda1 * u_prev + lambda2 * u_season - (lambda1 + lambda2) * u_hat)


def streaming_cost(
    y: np.ndarray,
    mask: np.ndarray,
    outliers: np.ndarray,
    nontemporal: Sequence[np.ndarray],
    u: np.ndarray,
    u_prev: np.ndarray,
    u_season: np.ndarray,
    lambda1: float,
    lambda2: float,
    lambda3: float,
) -> float:
    """只含第 t 项的代价 f_t。"""
    mask = np.asarray(mask, dtype=bool)
    residual = np.where(mask, np.asarray(y, dtype=float) - outliers - kruskal_slice(nontemporal, u), 0.0)
    return float(
        np.sum(np.square(residual))
        + lambda1 * np.sum(np.square(u_prev - u))
        + lambda2 * np.sum(np.square(u_season - u))
        + lambda3 * np.sum(np.abs(outliers))
    )


def step(state: StreamState, y: np.ndarray, mask: np.ndarray) -> Tuple[StepOutput, StreamState]:
    """处理一个切片，返回 (StepOutput, 新状态)；输入状态不被修改。"""
    y = np.asarray(y, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if y.shape != state.slice_shape or mask.shape != state.slice_shape:
        raise ConfigurationError(
            f"t={state.t}: 切片形状 {y.shape}/{mask.shape} 与模型切片形状 {state.slice_shape} 不符"
        )
    cfg = state.config
    u_hat, forecast = forecast_next(state)

    if cfg.preclean:
        outliers = estimate_outliers(y, mask, forecast, state.error_scale, cfg.robust.huber_k, cfg.sigma_floor)
        error_scale = update_error_scale(state.error_scale, y, mask, forecast, cfg.robust, cfg.sigma_floor)
    else:
        outliers = np.zeros(state.slice_shape)
        error_scale = state.error_scale

    residual = np.where(mask, y - outliers - forecast, 0.0)
    nontemporal = grad_update_nontemporal(state.nontemporal, residual, u_hat, cfg.mu, mask)
    u_t = grad_update_temporal(
        u_hat,
        residual,
        state.nontemporal,
        state.temporal[-1],
        state.temporal[0],
        cfg.mu,
        cfg.lambda1,
        cfg.lambda2,
        mask,
    )
    if not (np.all(np.isfinite(u_t)) and all(np.all(np.isfinite(m)) for m in nontemporal)):
        raise InputError(
            f"t={state.t}: 梯度步发散（因子出现 inf/NaN），当前步长 mu={cfg.mu:g}，请调小 mu"
        )
    hw = hw_update(state.hw, u_t)
    imputed = kruskal_slice(nontemporal, u_t)
    if not np.all(np.isfinite(imputed)):
        raise InputError(f"t={state.t}: 重构值溢出，当前步长 mu={cfg.mu:g}，请调小 mu")

    new_state = replace(
        state,
        nontemporal=tuple(nontemporal),
        temporal=np.vstack([state.temporal[1:], u_t]),
        hw=hw,
        error_scale=error_scale,
        t=state.t + 1,
    )
    return StepOutput(imputed=imputed, outliers=outliers, one_step_forecast=forecast), new_state


def run_stream(
    state: StreamState, slices: Iterable[Tuple[np.ndarray, np.ndarray]]
) -> Iterator[Tuple[StepOutput, StreamState]]:
    """依次对每个 (Y_t, Ω_t) 调用 step，逐步产出结果与最新状态。"""
    for y, mask in slices:
        output, state = step(state, y, mask)
        yield output, state
