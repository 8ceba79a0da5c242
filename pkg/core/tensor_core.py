"""
SOFIA 引擎 - 张量基础运算

稠密张量直接用 numpy.ndarray 表示（行主序，最后一个下标变化最快），
观测掩码是同形状的 bool 数组。这里提供其余模块共用的多线性代数原语：
Khatri-Rao 积、模态展开 / 折叠、Kruskal 重构与带掩码的 Frobenius 范数。

展开约定：mode_unfold(X, n) 的列按「除 n 外其余模态，下标小的变化最快」排列，
与按模态降序连乘的 Khatri-Rao 链配套，使得对 Kruskal 张量恒有
    X_(n) = U(n) @ khatri_rao_chain(U, skip=n).T
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InputError

logger = logging.getLogger(__name__)


def dense_tensor(values: Iterable[float], shape: Sequence[int]) -> np.ndarray:
    """由行主序数值列表构造稠密张量，并校验形状不变量。"""
    shape = tuple(int(s) for s in shape)
    if not shape or any(s < 1 for s in shape):
        raise InputError(f"张量形状非法: {shape}")
    data = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if data.size != int(np.prod(shape)):
        raise DimensionError(f"数值个数 {data.size} 与形状 {shape} 不符")
    return data.reshape(shape)


def observation_mask(bits: Iterable[bool], shape: Sequence[int]) -> np.ndarray:
    """由行主序布尔序列构造观测掩码。"""
    shape = tuple(int(s) for s in shape)
    mask = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=bool)
    if mask.size != int(np.prod(shape)):
        raise DimensionError(f"掩码位数 {mask.size} 与形状 {shape} 不符")
    return mask.reshape(shape)


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """列向 Kronecker 积：结果第 r 列为 kron(a[:, r], b[:, r])，b 的行下标变化最快。"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("khatri_rao 只接受矩阵")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"列数不一致: {a.shape[1]} != {b.shape[1]}")
    return np.einsum("ir,jr->ijr", a, b).reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_chain(matrices: Sequence[np.ndarray], skip: Optional[int] = None) -> np.ndarray:
    """按模态降序连乘 Khatri-Rao 积（跳过 skip 模态）。

    没有剩余矩阵时返回 1×R 的全 1 行，对应标量展开。
    """
    if not matrices:
        raise DimensionError("khatri_rao_chain 至少需要一个矩阵")
    rank = np.asarray(matrices[0]).shape[1]
    chosen = [np.asarray(m, dtype=float) for idx, m in enumerate(matrices) if idx != skip]
    if not chosen:
        return np.ones((1, rank))
    return reduce(khatri_rao, reversed(chosen))


def _check_mode(ndim: int, n: int) -> None:
    if not 0 <= n < ndim:
        raise DimensionError(f"模态 {n} 超出范围 [0, {ndim})")


def mode_unfold(tensor: np.ndarray, n: int) -> np.ndarray:
    """模态 n 展开：I_n × ∏_{i≠n} I_i。"""
    tensor = np.asarray(tensor)
    _check_mode(tensor.ndim, n)
    return np.reshape(np.moveaxis(tensor, n, 0), (tensor.shape[n], -1), order="F")


def mode_fold(matrix: np.ndarray, n: int, shape: Sequence[int]) -> np.ndarray:
    """mode_unfold 的逆运算。"""
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), n)
    moved = (shape[n],) + shape[:n] + shape[n + 1:]
    matrix = np.asarray(matrix)
    if matrix.size != int(np.prod(shape)) or matrix.shape[0] != shape[n]:
        raise DimensionError(f"矩阵形状 {matrix.shape} 无法折叠为 {shape}")
    return np.moveaxis(np.reshape(matrix, moved, order="F"), 0, n)


@dataclass(frozen=True)
class FactorSet:
    """CP 因子矩阵集合，matrices[n] 形状为 I_n × R；时间模态固定为最后一个模态。"""

    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=float) for m in self.matrices)
        if not mats:
            raise DimensionError("FactorSet 至少需要一个因子矩阵")
        for m in mats:
            if m.ndim != 2 or m.shape[0] < 1:
                raise DimensionError(f"因子矩阵形状非法: {m.shape}")
        ranks = {m.shape[1] for m in mats}
        if len(ranks) != 1 or 0 in ranks:
            raise DimensionError(f"因子矩阵列数不一致: {sorted(ranks)}")
        object.__setattr__(self, "matrices", mats)

    @property
    def rank(self) -> int:
        return self.matrices[0].shape[1]

    @property
    def ndim(self) -> int:
        return len(self.matrices)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(m.shape[0] for m in self.matrices)

    @property
    def temporal_mode(self) -> int:
        return self.ndim - 1

    @property
    def temporal(self) -> np.ndarray:
        return self.matrices[-1]

    @property
    def nontemporal(self) -> List[np.ndarray]:
        return list(self.matrices[:-1])

    def copy(self) -> "FactorSet":
        return FactorSet(tuple(m.copy() for m in self.matrices))

    def normalized(self) -> "FactorSet":
        """把每个非时间列的范数转移到时间列，非时间列归一化为单位长度。"""
        mats = [m.copy() for m in self.matrices]
        for n in range(self.ndim - 1):
            transfer_column_norms(mats, n)
        return FactorSet(tuple(mats))


def transfer_column_norms(matrices: List[np.ndarray], n: int) -> None:
    """就地把 matrices[n] 各列范数乘进时间矩阵，并把 matrices[n] 列归一化。

    范数为 0 的列保持原样。
    """
    norms = np.linalg.norm(matrices[n], axis=0)
    safe = norms > 0
    matrices[-1][:, safe] *= norms[safe]
    matrices[n][:, safe] /= norms[safe]


def kruskal_reconstruct(factors: FactorSet | Sequence[np.ndarray]) -> np.ndarray:
    """Kruskal 重构：entry(i_1..i_N) = Σ_r ∏_n U(n)[i_n, r]。"""
    mats = factors.matrices if isinstance(factors, FactorSet) else tuple(factors)
    shape = tuple(np.asarray(m).shape[0] for m in mats)
    unfolded = np.asarray(mats[0], dtype=float) @ khatri_rao_chain(mats, skip=0).T
    return mode_fold(unfolded, 0, shape)


def kruskal_slice(nontemporal: Sequence[np.ndarray], temporal_row: np.ndarray) -> np.ndarray:
    """用单个时间行向量重构 I_1×…×I_{N-1} 子张量（预测值 Ŷ 与重构值 X̂ 都走这里）。"""
    row = np.asarray(temporal_row, dtype=float).ravel()
    if not nontemporal:
        raise DimensionError("kruskal_slice 至少需要一个非时间因子矩阵")
    first = np.asarray(nontemporal[0], dtype=float)
    if first.shape[1] != row.size:
        raise DimensionError(f"时间行长度 {row.size} 与秩 {first.shape[1]} 不符")
    return kruskal_reconstruct([first * row] + [np.asarray(m, dtype=float) for m in nontemporal[1:]])


def masked_frobenius(tensor: np.ndarray, mask: np.ndarray) -> float:
    """只对掩码置位的元素求 Frobenius 范数。"""
    tensor = np.asarray(tensor, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if tensor.shape != mask.shape:
        raise DimensionError(f"张量形状 {tensor.shape} 与掩码形状 {mask.shape} 不符")
    return float(np.sqrt(np.sum(np.square(tensor[mask]))))


def check_finite(name: str, array: np.ndarray, mask: Optional[np.ndarray] = None) -> None:
    """掩码内（或全部）元素必须是有限值。"""
    values = np.asarray(array, dtype=float)
    if mask is not None:
        values = values[np.asarray(mask, dtype=bool)]
    if not np.all(np.isfinite(values)):
        raise InputError(f"{name} 含非有限值")
