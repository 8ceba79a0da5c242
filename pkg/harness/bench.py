"""
Sofia - 规模测试

对行数不同的切片（rows×cols）各跑一遍在线阶段，统计单步平均耗时，
拟合 log(耗时)–log(每片元素数) 的斜率，并比较最长一次运行首尾四分位的单步耗时。
切片由 SyntheticStream 逐片生成，不物化整条流。
"""

import csv
import io
import logging
import os
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence

import numpy as np

from core.sofia_batch import initialize
from core.sofia_online import bootstrap_stream, step
from core.utils.time_utils import Stopwatch, format_duration
from models.configs import BatchConfig, CorruptionSpec, OnlineConfig, SynthConfig

from .artifacts import write_json, write_text_atomic
from .synthetic import SyntheticStream

logger = logging.getLogger(__name__)

BENCH_CSV = "bench.csv"
BENCH_JSON = "bench.json"


@dataclass
class BenchPoint:
    rows: int
    cols: int
    entries: int
    steps: int
    mean_step_ms: float
    init_seconds: float


def quartile_ratio(step_times: Sequence[float]) -> float:
    """末四分位与首四分位平均单步耗时之比。"""
    times = np.asarray(step_times, dtype=float)
    quarter = max(1, times.size // 4)
    return float(times[-quarter:].mean() / times[:quarter].mean())


def loglog_slope(entries: Sequence[int], times: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(entries), np.log(times), 1)
    return float(slope)


def _run_size(
    rows: int, cols: int, steps: int, batch: BatchConfig, online: OnlineConfig, corruption: CorruptionSpec
) -> tuple:
    t_i = batch.startup_length
    generator = SyntheticStream(
        SynthConfig(shape=[rows, cols], length=t_i + steps, rank=batch.rank, period=batch.period, seed=batch.seed),
        corruption=corruption,
    )
    watch = Stopwatch()
    with watch.phase("init"):
        result = initialize(list(generator.slices(0, t_i)), batch)
        state = bootstrap_stream(result, online, batch.period)

    step_times = []
    for y, mask in generator.slices(t_i):
        start = time.perf_counter()
        _, state = step(state, y, mask)
        step_times.append(time.perf_counter() - start)
    # 首个在线步视作热身
    kept = step_times[1:] or step_times
    point = BenchPoint(
        rows=rows,
        cols=cols,
        entries=rows * cols,
        steps=len(step_times),
        mean_step_ms=float(np.mean(kept)) * 1000.0,
        init_seconds=watch.timings["init"],
    )
    logger.info(
        f"Sofia: bench {rows}×{cols} 单步 {format_duration(point.mean_step_ms / 1000.0)} "
        f"初始化 {format_duration(point.init_seconds)}"
    )
    return point, kept


def run_bench(
    rows: Sequence[int],
    cols: int,
    steps: int,
    batch: BatchConfig,
    online: OnlineConfig,
    corruption: CorruptionSpec,
    output_dir: str,
) -> Dict[str, object]:
    """逐个行数运行并写出 bench.csv / bench.json，返回汇总。"""
    points: List[BenchPoint] = []
    longest: List[float] = []
    for r in rows:
        point, kept = _run_size(r, cols, steps, batch, online, corruption)
        points.append(point)
        if len(kept) >= len(longest):
            longest = kept

    summary: Dict[str, object] = {
        "points": [asdict(p) for p in points],
        "slope": loglog_slope([p.entries for p in points], [p.mean_step_ms for p in points]) if len(points) > 1 else None,
        "quartile_ratio": quartile_ratio(longest) if len(longest) >= 4 else None,
    }

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rows", "cols", "entries", "steps", "mean_step_ms", "init_seconds"])
    for p in points:
        writer.writerow([p.rows, p.cols, p.entries, p.steps, repr(p.mean_step_ms), repr(p.init_seconds)])
    write_text_atomic(os.path.join(output_dir, BENCH_CSV), buffer.getvalue())
    write_json(os.path.join(output_dir, BENCH_JSON), summary)
    logger.info(f"Sofia: bench 完成 slope={summary['slope']} quartile_ratio={summary['quartile_ratio']}")
    return summary
