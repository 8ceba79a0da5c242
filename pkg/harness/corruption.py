"""
Sofia - 污染注入

(X, Y, Z) 按切片独立抽样：每个切片用 default_rng([seed, t]) 生成，
所以某一切片的污染只取决于 (spec, t, 切片本身)，与遍历顺序无关。
缺失位置的值存为 0 且掩码置 False；既离群又缺失的元素按缺失处理。
"""

import logging
from typing import Tuple

import numpy as np

from models.configs import CorruptionSpec

from .stream import TensorStream

logger = logging.getLogger(__name__)


def _count(pct: float, size: int) -> int:
    return int(round(pct / 100.0 * size))


def corrupt_slice(
    clean: np.ndarray, spec: CorruptionSpec, t: int, max_value: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (观测值, 掩码, 离群位置)；离群位置只包含仍被观测到的元素。"""
    clean = np.asarray(clean, dtype=float)
    size = clean.size
    rng = np.random.default_rng([spec.seed, t])

    values = clean.ravel().copy()
    outliers = np.zeros(size, dtype=bool)
    n_outliers = _count(spec.outlier_pct, size)
    if n_outliers:
        picked = rng.choice(size, size=n_outliers, replace=False)
        signs = rng.choice(np.array([-1.0, 1.0]), size=n_outliers)
        values[picked] = signs * spec.outlier_mag * max_value
        outliers[picked] = True

    mask = np.ones(size, dtype=bool)
    n_missing = _count(spec.missing_pct, size)
    if n_missing:
        mask[rng.choice(size, size=n_missing, replace=False)] = False

    values[~mask] = 0.0
    outliers &= mask
    shape = clean.shape
    return values.reshape(shape), mask.reshape(shape), outliers.reshape(shape)


def inject_corruption(stream: TensorStream, spec: CorruptionSpec) -> TensorStream:
    """对整条流注入污染；max(𝒳) 取真值通道（无真值时取观测值）的最大绝对值。"""
    truth = stream.truth if stream.truth is not None else stream.values
    truth_mask = stream.truth_mask if stream.truth is not None else stream.masks.copy()
    if spec.is_clean:
        return TensorStream(
            values=stream.values,
            masks=stream.masks,
            period=stream.period,
            truth=truth,
            outlier_positions=np.zeros(stream.values.shape, dtype=bool),
            truth_mask=truth_mask,
            name=stream.name,
        )

    max_value = float(np.max(np.abs(truth))) if truth.size else 0.0
    values = np.empty_like(stream.values)
    masks = np.empty_like(stream.masks)
    positions = np.empty(stream.values.shape, dtype=bool)
    for t in range(stream.length):
        y, mask, outliers = corrupt_slice(stream.values[t], spec, t, max_value)
        mask &= stream.masks[t]
        values[t] = np.where(mask, y, 0.0)
        masks[t] = mask
        positions[t] = outliers & mask

    logger.info(
        f"Sofia: 污染注入完成 ({spec.missing_pct:g},{spec.outlier_pct:g},{spec.outlier_mag:g}) "
        f"观测率={masks.mean():.3f} 离群={int(positions.sum())} max={max_value:.4g}"
    )
    return TensorStream(
        values=values,
        masks=masks,
        period=stream.period,
        truth=truth,
        outlier_positions=positions,
        truth_mask=truth_mask,
        name=stream.name,
    )
