"""
Sofia - 评估指标

NRE：‖X̂_t − X_t‖_F / ‖X_t‖_F（整片计算，缺失位置也计入）
RAE：NRE 序列均值
AFE：预测区间内各步预测 NRE 的均值
ART：初始化之后的平均单步耗时，不含热身步
"""

from typing import Iterable, Mapping, Sequence

import numpy as np

from core.errors import DimensionError, UndefinedMetricError


def metric_nre(estimate: np.ndarray, truth: np.ndarray) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DimensionError(f"估计 {estimate.shape} 与真值 {truth.shape} 形状不一致")
    norm = float(np.linalg.norm(truth))
    if norm == 0.0:
        raise UndefinedMetricError("真值范数为 0，NRE 无定义")
    return float(np.linalg.norm(estimate - truth)) / norm


def metric_rae(series: Sequence[float]) -> float:
    values = [float(v) for v in series]
    if not values:
        raise UndefinedMetricError("空的 NRE 序列，RAE 无定义")
    return sum(values) / len(values)


def metric_afe(forecasts: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> float:
    if len(forecasts) != len(truths):
        raise DimensionError(f"预测 {len(forecasts)} 步与真值 {len(truths)} 步不一致")
    return metric_rae(metric_nre(f, x) for f, x in zip(forecasts, truths))


def metric_art(timings: Mapping[int, float], t_i: int) -> float:
    """timings 以 0 起的时间下标为键（秒）；只平均 t > t_i 的步，t_i 处的首个在线步视作热身。"""
    kept = [seconds for t, seconds in timings.items() if t > t_i]
    if not kept:
        raise UndefinedMetricError(f"t > {t_i} 的步没有计时记录，ART 无定义")
    return sum(kept) / len(kept)


def outlier_recall(flagged: Iterable[np.ndarray], injected: Iterable[np.ndarray]) -> float:
    """被注入的离群位置中 |O_t| > 0 的比例。"""
    hits = 0
    total = 0
    for flag, truth in zip(flagged, injected):
        truth = np.asarray(truth, dtype=bool)
        hits += int(np.count_nonzero(np.asarray(flag, dtype=bool) & truth))
        total += int(np.count_nonzero(truth))
    if total == 0:
        raise UndefinedMetricError("没有注入离群位置，召回率无定义")
    return hits / total
