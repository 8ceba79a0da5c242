"""
Sofia - 三元组文件读写

输入：带表头的分隔文本，列依次为 N-1 个下标列、时间列、数值列，下标 0 起，UTF-8。
按时间（可按 granularity 分桶）把记录归入各时刻子张量；同一 (下标, 时刻) 重复出现时后写覆盖前写。
"""

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import BoundsError, ConfigurationError, ParseError

from .stream import TensorStream

logger = logging.getLogger(__name__)

Index = Tuple[int, ...]
Record = Tuple[int, List[Tuple[Index, float]]]


@dataclass
class TensorStreamSource:
    """稀疏流：records 为按时间严格递增的 (t, [(下标, 值), ...])。"""

    shape: Tuple[int, ...]
    period: Optional[int] = None
    records: List[Record] = field(default_factory=list)
    truth: Optional[np.ndarray] = None
    duplicates: int = 0

    @property
    def length(self) -> int:
        return self.records[-1][0] + 1 if self.records else 0

    @property
    def n_observed(self) -> int:
        return sum(len(entries) for _, entries in self.records)

    def to_stream(self, period: Optional[int] = None, name: str = "triples") -> TensorStream:
        """转成稠密流；没有记录的时刻是全缺失切片。"""
        period = period or self.period
        if not period:
            raise ConfigurationError("三元组数据源需要指定季节周期")
        # 空文件且未声明形状时得到长度 0 的流
        slice_shape = tuple(self.shape) or (0,)
        values = np.zeros((self.length,) + slice_shape)
        masks = np.zeros(values.shape, dtype=bool)
        for t, entries in self.records:
            for index, value in entries:
                values[(t,) + index] = value
                masks[(t,) + index] = True
        return TensorStream(values=values, masks=masks, period=period, truth=self.truth, name=name)


def _parse_row(row: Sequence[str], width: int, line_number: int) -> Tuple[Index, int, float]:
    if len(row) != width:
        raise ParseError(f"期望 {width} 列，实际 {len(row)} 列", line_number)
    try:
        index = tuple(int(cell) for cell in row[:-2])
        t = int(row[-2])
        value = float(row[-1])
    except ValueError as e:
        raise ParseError(f"无法解析数值: {e}", line_number) from e
    if t < 0 or any(i < 0 for i in index):
        raise BoundsError(f"下标必须非负: {tuple(row[:-1])}", line_number)
    if not math.isfinite(value):
        raise ParseError(f"数值非有限: {row[-1]}", line_number)
    return index, t, value


def _standardize(buckets: Dict[int, Dict[Index, float]], mode: int) -> None:
    by_index: Dict[int, List[float]] = defaultdict(list)
    for entries in buckets.values():
        for index, value in entries.items():
            by_index[index[mode]].append(value)
    stats = {}
    for i, values in by_index.items():
        std = float(np.std(values))
        stats[i] = (float(np.mean(values)), std if std > 0 else 1.0)
    for entries in buckets.values():
        for index in entries:
            mean, std = stats[index[mode]]
            entries[index] = (entries[index] - mean) / std


def ingest_triples(
    path: str,
    shape: Optional[Sequence[int]] = None,
    period: Optional[int] = None,
    delimiter: str = ",",
    granularity: int = 1,
    log2: bool = False,
    standardize_mode: Optional[int] = None,
) -> TensorStreamSource:
    """
    读取三元组文件。

    Args:
        shape: 非时间模态形状；为空时取各列最大下标 + 1。
        granularity: 时间分桶宽度，时刻 = 源时间 // granularity。
        log2: 为真时每个值变换为 log2(x+1)。
        standardize_mode: 按该模态的每个下标做 z-score 标准化。
    """
    if granularity < 1:
        raise ConfigurationError(f"granularity 必须 ≥ 1，当前为 {granularity}")
    declared = tuple(int(s) for s in shape) if shape else None
    buckets: Dict[int, Dict[Index, float]] = defaultdict(dict)
    duplicates = 0
    width = None

    with open(path, encoding="utf-8-sig", newline="") as f:
        reader = csv.reader(f, delimiter=delimiter)
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if width is None:
                width = len(row)
                if width < 3:
                    raise ParseError(f"表头至少需要 3 列，实际 {width} 列", reader.line_num)
                if declared is not None and width != len(declared) + 2:
                    raise ParseError(f"表头 {width} 列与声明形状 {declared} 不符", reader.line_num)
                continue
            index, t, value = _parse_row(row, width, reader.line_num)
            if declared is not None and any(i >= s for i, s in zip(index, declared)):
                raise BoundsError(f"下标 {index} 超出形状 {declared}", reader.line_num)
            if log2:
                if value <= -1.0:
                    raise ParseError(f"log2 变换要求数值 > -1，实际为 {value}", reader.line_num)
                value = math.log2(value + 1.0)
            bucket = buckets[t // granularity]
            if index in bucket:
                duplicates += 1
            bucket[index] = value

    if duplicates:
        logger.warning(f"Sofia: {path} 含 {duplicates} 条重复 (下标, 时刻) 记录，已按后写覆盖")

    n_index = width - 2 if width else (len(declared) if declared else 0)
    if declared is None:
        declared = tuple(
            max((index[n] for entries in buckets.values() for index in entries), default=-1) + 1
            for n in range(n_index)
        )
    if standardize_mode is not None:
        if not 0 <= standardize_mode < len(declared):
            raise ConfigurationError(f"standardize_mode={standardize_mode} 超出模态范围")
        _standardize(buckets, standardize_mode)

    records = [(t, sorted(buckets[t].items())) for t in sorted(buckets)]
    source = TensorStreamSource(shape=declared, period=period, records=records, duplicates=duplicates)
    logger.info(f"Sofia: 读取 {path} 形状={declared} 时刻数={source.length} 观测={source.n_observed}")
    return source


def export_triples(source: TensorStreamSource, path: str, delimiter: str = ",") -> int:
    """把观测三元组写回文件，返回写出的行数。"""
    n_index = len(source.shape)
    header = [f"i{n}" for n in range(n_index)] + ["t", "value"]
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter=delimiter)
        writer.writerow(header)
        for t, entries in source.records:
            for index, value in entries:
                writer.writerow([*index, t, repr(float(value))])
                count += 1
    return count


def stream_to_source(stream: TensorStream, observed_only: bool = True) -> TensorStreamSource:
    """稠密流转回稀疏三元组（synth 子命令写 observed.csv / truth.csv 用）。"""
    records = []
    for t in range(stream.length):
        values, mask = stream.slice(t)
        keep = mask if observed_only else np.ones(mask.shape, dtype=bool)
        entries = [(tuple(int(i) for i in index), float(values[index])) for index in zip(*np.nonzero(keep))]
        if entries:
            records.append((t, entries))
    return TensorStreamSource(shape=stream.slice_shape, period=stream.period, records=records)
