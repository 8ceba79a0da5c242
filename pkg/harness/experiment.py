"""
Sofia - 实验编排

run_experiment：读取/生成数据 → 注入污染 → 初始化 → HW 拟合 → 逐步在线更新
（→ 留出段预测），写 steps.csv、summary.json 与可选检查点。
run_repeats：多种子在工作线程中并行运行，汇总各种子均值。
"""

import asyncio
import logging
import os
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.checkpoint import save_state
from core.config_manager import ConfigManager
from core.errors import ConfigurationError, InsufficientHistoryError, SofiaError
from core.sofia_batch import BatchResult, initialize
from core.sofia_online import StreamState, bootstrap_stream, forecast_h, step
from core.utils.time_utils import Stopwatch, elapsed_ms
from models.configs import BatchConfig
from models.reports import MetricsReport, StepRecord

from .artifacts import STATE_FILE_NAME, STEPS_FILE_NAME, SUMMARY_FILE_NAME, write_json, write_steps_csv
from .corruption import inject_corruption
from .ingest import ingest_triples
from .metrics import metric_afe, metric_art, metric_nre, metric_rae, outlier_recall
from .stream import TensorStream
from .synthetic import synth_stream

logger = logging.getLogger(__name__)

_DIVERGENCE_NRE = 1e3


@dataclass
class ExperimentResult:
    report: MetricsReport
    records: List[StepRecord]
    state: StreamState
    batch: Optional[BatchResult]
    output_dir: str


def load_stream(scenario: ConfigManager, seed: int) -> TensorStream:
    """按场景构造数据流并注入污染。"""
    if scenario.source_kind == "synthetic":
        stream, _ = synth_stream(scenario.synth_config(seed), name=scenario.name)
    else:
        source = ingest_triples(
            scenario.source_path,
            shape=scenario.source_shape,
            period=scenario.period,
            delimiter=scenario.delimiter,
            granularity=scenario.granularity,
            log2=scenario.log2_transform,
            standardize_mode=scenario.standardize_mode,
        )
        stream = source.to_stream(scenario.period, scenario.name)
    return inject_corruption(stream, scenario.corruption_spec(seed))


def _scored_nre(stream: TensorStream, t: int, estimate: np.ndarray) -> Optional[float]:
    truth = stream.truth_slice(t)
    if truth is None:
        return None
    keep = stream.evaluation_mask(t)
    if keep is not None:
        if not keep.any():
            return None
        return metric_nre(estimate[keep], truth[keep])
    return metric_nre(estimate, truth)


def batch_config_for(scenario: ConfigManager, seed: int) -> BatchConfig:
    config = scenario.batch_config(seed)
    if scenario.vanilla_init:
        config = config.model_copy(update={"lambda1": 0.0, "lambda2": 0.0})
    return config


def startup(
    scenario: ConfigManager, stream: TensorStream, seed: int, watch: Stopwatch
) -> Tuple[BatchResult, StreamState, BatchConfig]:
    """初始化 + HW 拟合，返回 (初始化结果, 初始在线状态, 实际使用的 BatchConfig)。"""
    batch_config = batch_config_for(scenario, seed)
    t_i = batch_config.startup_length
    if stream.length < t_i:
        raise InsufficientHistoryError(f"初始化需要 {t_i} 个切片，可用 {stream.length} 个")
    with watch.phase("init"):
        batch = initialize(list(stream.slices(0, t_i)), batch_config, robust=not scenario.vanilla_init)
    with watch.phase("hw_fit"):
        state = bootstrap_stream(batch, scenario.online_config(), batch_config.period)
    return batch, state, batch_config


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4g}"


def _check_resume(state: StreamState, stream: TensorStream, t_i: int, end: int) -> None:
    if state.slice_shape != stream.slice_shape:
        raise ConfigurationError(f"检查点切片形状 {state.slice_shape} 与数据流切片形状 {stream.slice_shape} 不符")
    if not t_i <= state.t <= end:
        raise ConfigurationError(f"检查点时刻 t={state.t} 不在可续跑范围 [{t_i}, {end}] 内")


def _run(
    scenario: ConfigManager,
    seed: int,
    output_dir: str,
    write: bool,
    resume: Optional[StreamState] = None,
) -> ExperimentResult:
    watch = Stopwatch()
    stream = load_stream(scenario, seed)
    horizon = scenario.horizon
    end = stream.length - horizon
    t_i = batch_config_for(scenario, seed).startup_length
    if end < t_i:
        raise InsufficientHistoryError(f"留出 {horizon} 步后只剩 {end} 个切片，不足初始化所需 {t_i} 个")
    train = stream.head(end)

    records: List[StepRecord] = []
    batch: Optional[BatchResult] = None
    if resume is None:
        batch, state, _ = startup(scenario, train, seed, watch)
        for t in range(t_i):
            records.append(
                StepRecord(
                    t=t,
                    nre=_scored_nre(train, t, batch.completed[..., t]),
                    n_observed=int(train.masks[t].sum()),
                    n_outliers_flagged=int(np.count_nonzero(batch.outliers[..., t])),
                )
            )
    else:
        _check_resume(resume, train, t_i, end)
        state = resume
        logger.info(f"Sofia[{scenario.name}]: 从检查点 t={state.t} 继续")
    first = state.t

    step_seconds: Dict[int, float] = {}
    flagged: List[np.ndarray] = []
    injected: List[np.ndarray] = []
    warned = False
    with watch.phase("stream"):
        for t in range(first, end):
            y, mask = train.slice(t)
            start = time.perf_counter()
            output, state = step(state, y, mask)
            ms = elapsed_ms(start)
            step_seconds[t] = ms / 1000.0
            flags = output.outliers != 0
            record = StepRecord(
                t=t,
                nre=_scored_nre(train, t, output.imputed),
                step_ms=ms,
                n_observed=int(mask.sum()),
                n_outliers_flagged=int(np.count_nonzero(flags)),
            )
            records.append(record)
            if not warned and record.nre is not None and record.nre > _DIVERGENCE_NRE:
                logger.warning(
                    f"Sofia[{scenario.name}]: t={t} NRE={record.nre:.3g}，在线更新可能正在发散，"
                    f"请调小 mu（当前 {state.config.mu:g}）"
                )
                warned = True
            if train.outlier_positions is not None and t >= t_i + train.period:
                flagged.append(flags)
                injected.append(train.outlier_positions[t])
            logger.debug(f"Sofia[{scenario.name}]: t={t} nre={record.nre} {ms:.3f}ms")

    afe = None
    if horizon > 0:
        with watch.phase("forecast"):
            forecasts = [forecast_h(state, h) for h in range(1, horizon + 1)]
        truths = [stream.truth_slice(end + h - 1) for h in range(1, horizon + 1)]
        if all(x is not None for x in truths):
            afe = metric_afe(forecasts, truths)

    nre = [r.nre for r in records if r.nre is not None]
    recall = None
    if injected and any(np.any(p) for p in injected):
        recall = outlier_recall(flagged, injected)
    report = MetricsReport(
        nre=nre,
        rae=metric_rae(nre) if nre else None,
        afe=afe,
        art=metric_art(step_seconds, first) if len(step_seconds) > 1 else None,
        timings=dict(watch.timings),
        n_steps=len(step_seconds),
        seed=seed,
        outlier_recall=recall,
    )
    logger.info(
        f"Sofia[{scenario.name}]: 运行完成 seed={seed} 步数={report.n_steps} "
        f"RAE={_fmt(report.rae)} AFE={_fmt(report.afe)}"
    )

    if write:
        write_steps_csv(os.path.join(output_dir, STEPS_FILE_NAME), records, omit_timing=scenario.omit_timing)
        summary = report.model_dump(exclude={"nre"})
        summary.update(name=scenario.name, config=scenario.as_dict(), resumed_from=None if resume is None else first)
        write_json(os.path.join(output_dir, SUMMARY_FILE_NAME), summary)
        if scenario.save_checkpoint:
            save_state(state, os.path.join(output_dir, STATE_FILE_NAME))
    return ExperimentResult(report=report, records=records, state=state, batch=batch, output_dir=output_dir)


def run_experiment(
    scenario: ConfigManager,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
    write: bool = True,
    resume: Optional[StreamState] = None,
) -> ExperimentResult:
    """运行一个场景；内部错误附上场景名后按原类型重新抛出。

    resume 给出时跳过初始化，从检查点的 state.t 开始逐步更新，steps.csv 只含续跑部分。
    """
    seed = scenario.seed if seed is None else seed
    output_dir = output_dir or scenario.output_dir
    try:
        return _run(scenario, seed, output_dir, write, resume)
    except SofiaError as e:
        raise type(e)(f"[{scenario.name}] {e}") from e


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    kept = [v for v in values if v is not None]
    return sum(kept) / len(kept) if kept else None


def aggregate_reports(reports: Sequence[MetricsReport]) -> Dict[str, object]:
    """多种子结果的均值汇总。"""
    return {
        "seeds": [r.seed for r in reports],
        "rae": _mean([r.rae for r in reports]),
        "afe": _mean([r.afe for r in reports]),
        "art": _mean([r.art for r in reports]),
        "outlier_recall": _mean([r.outlier_recall for r in reports]),
        "per_seed": [r.model_dump(exclude={"nre"}) for r in reports],
    }


async def run_repeats(scenario: ConfigManager, output_dir: Optional[str] = None) -> Dict[str, object]:
    """以 seed, seed+1, ... 运行 run.repeats 次；各种子写入 <output>/seed_<s>/，汇总写入 <output>/summary.json。"""
    base = output_dir or scenario.output_dir
    seeds = [scenario.seed + k for k in range(scenario.repeats)]
    results = await asyncio.gather(
        *(
            asyncio.to_thread(run_experiment, scenario, seed, os.path.join(base, f"seed_{seed}"))
            for seed in seeds
        )
    )
    summary = aggregate_reports([r.report for r in results])
    summary.update(name=scenario.name, config=scenario.as_dict())
    write_json(os.path.join(base, SUMMARY_FILE_NAME), summary)
    logger.info(f"Sofia[{scenario.name}]: {len(seeds)} 个种子完成，平均 RAE={summary['rae']}")
    return summary


async def rank_sweep(scenario: ConfigManager, ranks: Sequence[int], output_dir: Optional[str] = None) -> Dict[int, object]:
    """按给定秩逐个运行场景并记录各自的平均 RAE，不做自动选择。"""
    base = output_dir or scenario.output_dir
    results = {}
    for rank in ranks:
        view = scenario.with_overrides({"model": {"rank": rank}})
        summary = await run_repeats(view, os.path.join(base, f"rank_{rank}"))
        results[rank] = summary["rae"]
        logger.info(f"Sofia[{scenario.name}]: rank={rank} RAE={summary['rae']}")
    write_json(os.path.join(base, "ranks.json"), {"name": scenario.name, "rae_by_rank": {str(k): v for k, v in results.items()}})
    return results
