"""
Sofia - 张量流容器

TensorStream：稠密内存流，values/masks 形状为 (T, I_1, ..., I_{N-1})，可选真值通道与注入离群位置。
"""

from dataclasses import dataclass, replace
from typing import Iterator, Optional, Tuple

import numpy as np

from core.errors import DimensionError


@dataclass(frozen=True)
class TensorStream:
    values: np.ndarray
    masks: np.ndarray
    period: int
    truth: Optional[np.ndarray] = None
    outlier_positions: Optional[np.ndarray] = None
    truth_mask: Optional[np.ndarray] = None
    name: str = "stream"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        masks = np.asarray(self.masks, dtype=bool)
        if values.shape != masks.shape or values.ndim < 2:
            raise DimensionError(f"流的值 {values.shape} 与掩码 {masks.shape} 形状不一致")
        extras = (("truth", self.truth), ("outlier_positions", self.outlier_positions), ("truth_mask", self.truth_mask))
        for label, extra in extras:
            if extra is not None and np.shape(extra) != values.shape:
                raise DimensionError(f"{label} 形状 {np.shape(extra)} 与流形状 {values.shape} 不一致")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masks", masks)

    @classmethod
    def fully_observed(cls, truth: np.ndarray, period: int, name: str = "stream") -> "TensorStream":
        truth = np.asarray(truth, dtype=float)
        return cls(values=truth, masks=np.ones(truth.shape, dtype=bool), period=period, truth=truth, name=name)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def slice_shape(self) -> Tuple[int, ...]:
        return self.values.shape[1:]

    def slice(self, t: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.values[t], self.masks[t]

    def truth_slice(self, t: int) -> Optional[np.ndarray]:
        return None if self.truth is None else self.truth[t]

    def evaluation_mask(self, t: int) -> Optional[np.ndarray]:
        """真值有定义的位置；None 表示整片都有真值。"""
        return None if self.truth_mask is None else self.truth_mask[t]

    def slices(self, start: int = 0, stop: Optional[int] = None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for t in range(start, self.length if stop is None else stop):
            yield self.slice(t)

    def head(self, length: int) -> "TensorStream":
        """前 length 个切片（预测场景用它切出训练段）。"""

        def cut(array):
            return None if array is None else array[:length]

        return replace(
            self,
            values=self.values[:length],
            masks=self.masks[:length],
            truth=cut(self.truth),
            outlier_positions=cut(self.outlier_positions),
            truth_mask=cut(self.truth_mask),
        )
