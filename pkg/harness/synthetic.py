"""
Sofia - 合成张量流

非时间因子取 [0,1) 均匀随机；时间因子第 r 列为 a_r·sin(2π/m·i + b_r) + c_r（i 从 1 计）。
SyntheticStream 按需逐片生成，规模测试用的大流不会整体物化。
"""

import logging
from typing import Iterator, Optional, Tuple

import numpy as np

from core.tensor_core import FactorSet, kruskal_slice
from models.configs import CorruptionSpec, SynthConfig

from .corruption import corrupt_slice
from .stream import TensorStream

logger = logging.getLogger(__name__)


class SyntheticStream:
    """惰性合成流：slice(t) 返回 (观测值, 掩码)，truth_slice(t) 返回无噪声真值。"""

    def __init__(
        self,
        config: SynthConfig,
        corruption: Optional[CorruptionSpec] = None,
        max_value: Optional[float] = None,
    ):
        self.config = config
        self.corruption = corruption
        rng = np.random.default_rng(config.seed)
        rank = config.rank
        self.nontemporal = tuple(rng.random((size, rank)) for size in config.shape)
        self.amplitude = rng.uniform(*config.amplitude_range, size=rank)
        self.phase = rng.uniform(*config.phase_range, size=rank)
        self.offset = rng.uniform(*config.offset_range, size=rank)
        self._max_value = max_value

    @property
    def length(self) -> int:
        return self.config.length

    @property
    def period(self) -> int:
        return self.config.period

    @property
    def slice_shape(self) -> Tuple[int, ...]:
        return tuple(self.config.shape)

    def temporal_row(self, t: int) -> np.ndarray:
        return self.amplitude * np.sin(2.0 * np.pi / self.period * (t + 1) + self.phase) + self.offset

    @property
    def factors(self) -> FactorSet:
        temporal = np.stack([self.temporal_row(t) for t in range(self.length)])
        return FactorSet(self.nontemporal + (temporal,))

    def truth_slice(self, t: int) -> np.ndarray:
        return kruskal_slice(self.nontemporal, self.temporal_row(t))

    @property
    def max_value(self) -> float:
        """整条真值流的最大绝对值；首次访问时逐片扫描。"""
        if self._max_value is None:
            self._max_value = max(
                (float(np.max(np.abs(self.truth_slice(t)))) for t in range(self.length)), default=0.0
            )
        return self._max_value

    def _noisy(self, t: int, clean: np.ndarray) -> np.ndarray:
        if self.config.noise <= 0:
            return clean
        rng = np.random.default_rng([self.config.seed, t, 1])
        return clean + rng.normal(0.0, self.config.noise, size=clean.shape)

    def slice_with_outliers(self, t: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        clean = self.truth_slice(t)
        observed = self._noisy(t, clean)
        if self.corruption is None or self.corruption.is_clean:
            return observed, np.ones(clean.shape, dtype=bool), np.zeros(clean.shape, dtype=bool)
        max_value = self.max_value if self.corruption.outlier_pct > 0 else 0.0
        return corrupt_slice(observed, self.corruption, t, max_value)

    def slice(self, t: int) -> Tuple[np.ndarray, np.ndarray]:
        values, mask, _ = self.slice_with_outliers(t)
        return values, mask

    def slices(self, start: int = 0, stop: Optional[int] = None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for t in range(start, self.length if stop is None else stop):
            yield self.slice(t)

    def materialize(self, name: str = "synthetic") -> TensorStream:
        truth = np.stack([self.truth_slice(t) for t in range(self.length)])
        parts = [self.slice_with_outliers(t) for t in range(self.length)]
        return TensorStream(
            values=np.stack([p[0] for p in parts]),
            masks=np.stack([p[1] for p in parts]),
            period=self.period,
            truth=truth,
            outlier_positions=np.stack([p[2] for p in parts]),
            name=name,
        )


def synth_stream(config: SynthConfig, name: str = "synthetic") -> Tuple[TensorStream, FactorSet]:
    """生成无污染（可选加噪）的完整观测流与生成因子。"""
    generator = SyntheticStream(config)
    stream = generator.materialize(name)
    logger.info(
        f"Sofia: 合成流 {name} 形状={tuple(config.shape)}×{config.length} 秩={config.rank} 周期={config.period}"
    )
    return stream, generator.factors
