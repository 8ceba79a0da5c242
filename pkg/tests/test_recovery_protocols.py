"""合成流上的端到端恢复实验：初始化恢复、预清洗消融、离群召回与缺失下的预测退化。

这些用例跑完整的 30×30 流，耗时较长，用 -m "not slow" 可跳过。
"""

import time
from pathlib import Path

import numpy as np
import pytest

from core.config_manager import ConfigManager, load_scenario
from core.utils.time_utils import Stopwatch
from harness.experiment import load_stream, run_experiment, startup
from harness.metrics import metric_nre

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2, 3, 4)
RECOVERY_SCENARIO = Path(__file__).resolve().parent.parent / "docs" / "scenarios" / "synthetic_recovery.json"


def _init_nre(scenario, seed):
    stream = load_stream(scenario, seed)
    start = time.perf_counter()
    batch, _, config = startup(scenario, stream, seed, Stopwatch())
    seconds = time.perf_counter() - start
    completed = np.moveaxis(batch.completed, -1, 0)
    return metric_nre(completed, stream.truth[: config.startup_length]), seconds


def test_initialization_recovers_heavily_corrupted_stream():
    scenario = load_scenario(str(RECOVERY_SCENARIO))
    vanilla = scenario.with_overrides({"ablation": {"vanilla_init": True}})

    robust_nre = []
    for seed in SEEDS:
        nre, seconds = _init_nre(scenario, seed)
        robust_nre.append(nre)
        assert seconds < 60.0
    vanilla_nre = [_init_nre(vanilla, seed)[0] for seed in SEEDS]

    assert np.mean(robust_nre) < 0.15
    assert np.mean(robust_nre) < np.mean(vanilla_nre) / 3


def _stream_scenario(corruption, mu, **groups):
    config = {
        "name": "stream-30x30",
        "synthetic": {"shape": [30, 30], "length": 600, "rank": 3, "period": 24},
        "model": {"rank": 3},
        "online": {"mu": mu},
        "corruption": dict(zip(("missing_pct", "outlier_pct", "outlier_mag"), corruption)),
        "run": {"seed": 0},
    }
    for group, values in groups.items():
        config.setdefault(group, {}).update(values)
    return ConfigManager(config)


@pytest.mark.parametrize("corruption", [(20, 10, 2), (70, 20, 5)])
def test_preclean_halves_running_error(corruption):
    scenario = _stream_scenario(corruption, mu=1e-4)
    ablated = scenario.with_overrides({"ablation": {"preclean": False}})

    full = [run_experiment(scenario, seed=seed, write=False).report.rae for seed in SEEDS[:2]]
    without = [run_experiment(ablated, seed=seed, write=False).report.rae for seed in SEEDS[:2]]

    assert np.mean(full) <= 0.5 * np.mean(without)


def test_injected_outliers_are_flagged_after_first_season():
    result = run_experiment(_stream_scenario((20, 10, 5), mu=1e-4), write=False)

    assert result.report.outlier_recall >= 0.8


def test_forecast_degrades_gracefully_with_missing_entries():
    horizon = {"forecast": {"horizon": 5 * 24}}
    dense = run_experiment(_stream_scenario((0, 20, 5), mu=1e-3, **horizon), write=False)
    sparse = run_experiment(_stream_scenario((50, 20, 5), mu=1e-3, **horizon), write=False)

    assert sparse.report.afe <= 1.5 * dense.report.afe
