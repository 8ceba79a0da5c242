"""
Sofia - 带季节性的鲁棒流式张量分解与补全

命令行入口：
- synth：生成带污染的合成流，写出 observed.csv / truth.csv / outliers.csv
- init：只跑初始化与 HW 拟合，写出 state.bin 与 init.json
- impute：完整流式补全（--ranks 可做秩扫描；--resume 从 state.bin 续跑，在线参数以检查点为准）
- forecast：留出末尾切片评估 AFE
- bench：规模测试
"""

import argparse
import asyncio
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from core.checkpoint import load_state, save_state
from core.config_manager import ConfigManager, load_scenario, parse_int_list
from core.errors import ConfigurationError, SofiaError
from core.utils.time_utils import Stopwatch
from harness.artifacts import STATE_FILE_NAME, write_json
from harness.bench import run_bench
from harness.experiment import load_stream, rank_sweep, run_experiment, run_repeats, startup
from harness.ingest import TensorStreamSource, export_triples, stream_to_source
from harness.stream import TensorStream

logger = logging.getLogger("sofia")


def _version() -> str:
    """从 metadata.yaml 读取版本号。"""
    try:
        meta_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "metadata.yaml")
        with open(meta_path, encoding="utf-8") as f:
            for line in f:
                if line.startswith("version:"):
                    return line.split(":", 1)[1].strip()
    except (OSError, ValueError):
        pass
    return "0.0.0"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON 场景文件")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--rank", type=int)
    parser.add_argument("--period", type=int)
    parser.add_argument("--lambda1", type=float)
    parser.add_argument("--lambda2", type=float)
    parser.add_argument("--lambda3", type=float)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--phi", type=float)
    parser.add_argument("--missing-pct", dest="missing_pct", type=float)
    parser.add_argument("--outlier-pct", dest="outlier_pct", type=float)
    parser.add_argument("--outlier-mag", dest="outlier_mag", type=float)
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--omit-timing", dest="omit_timing", action="store_true", default=None)
    parser.add_argument("--checkpoint", action="store_true", default=None, help="运行结束后写 state.bin")
    parser.add_argument("--vanilla-init", dest="vanilla_init", action="store_true", default=None)
    parser.add_argument("--no-preclean", dest="preclean", action="store_false", default=None)
    parser.add_argument("--verbose", "-v", action="store_true")


_OVERRIDE_FLAGS = (
    "seed", "rank", "period", "lambda1", "lambda2", "lambda3", "mu", "phi",
    "missing_pct", "outlier_pct", "outlier_mag", "repeats", "output_dir",
    "omit_timing", "checkpoint", "vanilla_init", "preclean",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sofia", description="带季节性的鲁棒流式张量分解与补全")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    commands = parser.add_subparsers(dest="command", required=True)

    _add_common(commands.add_parser("synth", help="生成带污染的合成流"))
    _add_common(commands.add_parser("init", help="初始化并保存模型状态"))
    impute = commands.add_parser("impute", help="流式补全")
    _add_common(impute)
    impute.add_argument("--ranks", help="秩扫描，如 4,8,12")
    impute.add_argument("--resume", help="从 init 写出的 state.bin 继续，跳过初始化")
    forecast = commands.add_parser("forecast", help="留出末尾切片评估预测误差")
    _add_common(forecast)
    forecast.add_argument("--horizon", type=int, help="留出切片数；缺省取场景配置或 5 个季节")
    bench = commands.add_parser("bench", help="规模测试")
    _add_common(bench)
    bench.add_argument("--rows", default="50,100,200,300,400,500", help="逐个测试的行数")
    bench.add_argument("--cols", type=int, default=500)
    bench.add_argument("--steps", type=int, default=200)
    return parser


def scenario_from_args(args: argparse.Namespace) -> ConfigManager:
    scenario = load_scenario(args.config) if args.config else ConfigManager({"name": args.command})
    flags = {key: getattr(args, key) for key in _OVERRIDE_FLAGS if getattr(args, key, None) is not None}
    return scenario.with_overrides(flags) if flags else scenario


def _write_triples(source: TensorStreamSource, path: str) -> None:
    count = export_triples(source, path)
    logger.info(f"Sofia: 已写入 {path}（{count} 行）")


def cmd_synth(scenario: ConfigManager, args: argparse.Namespace) -> int:
    stream = load_stream(scenario, scenario.seed)
    out = scenario.output_dir
    os.makedirs(out, exist_ok=True)
    _write_triples(stream_to_source(stream), os.path.join(out, "observed.csv"))
    truth = stream.truth if stream.truth is not None else stream.values
    truth_stream = TensorStream.fully_observed(truth, stream.period)
    _write_triples(stream_to_source(truth_stream), os.path.join(out, "truth.csv"))
    outliers = TensorStream(
        values=stream.values,
        masks=stream.outlier_positions if stream.outlier_positions is not None else np.zeros(truth.shape, dtype=bool),
        period=stream.period,
    )
    _write_triples(stream_to_source(outliers), os.path.join(out, "outliers.csv"))
    return 0


def cmd_init(scenario: ConfigManager, args: argparse.Namespace) -> int:
    seed = scenario.seed
    stream = load_stream(scenario, seed)
    watch = Stopwatch()
    batch, state, batch_config = startup(scenario, stream, seed, watch)
    out = scenario.output_dir
    os.makedirs(out, exist_ok=True)
    save_state(state, os.path.join(out, STATE_FILE_NAME))
    write_json(
        os.path.join(out, "init.json"),
        {
            "name": scenario.name,
            "seed": seed,
            "fitness": batch.fitness,
            "outer_passes": batch.iterations,
            "als_sweeps": batch.als_sweeps,
            "lambda3": batch.lambda3,
            "startup_length": batch_config.startup_length,
            "hw": {
                "alpha": state.hw.params.alpha.tolist(),
                "beta": state.hw.params.beta.tolist(),
                "gamma": state.hw.params.gamma.tolist(),
            },
            "timings": watch.timings,
        },
    )
    return 0


def cmd_impute(scenario: ConfigManager, args: argparse.Namespace) -> int:
    if args.resume:
        if args.ranks:
            raise ConfigurationError("--resume 与 --ranks 不能同时使用")
        state = load_state(args.resume)
        result = run_experiment(scenario, resume=state)
        print(f"rae={result.report.rae}\tart={result.report.art}\tresumed_from={state.t}")
        return 0
    if args.ranks:
        results = asyncio.run(rank_sweep(scenario, parse_int_list(args.ranks)))
        for rank, rae in results.items():
            print(f"rank={rank}\trae={rae}")
        return 0
    summary = asyncio.run(run_repeats(scenario))
    print(f"rae={summary['rae']}\tart={summary['art']}")
    return 0


def cmd_forecast(scenario: ConfigManager, args: argparse.Namespace) -> int:
    horizon = args.horizon or scenario.horizon or 5 * scenario.period
    summary = asyncio.run(run_repeats(scenario.with_overrides({"forecast": {"horizon": horizon}})))
    print(f"afe={summary['afe']}\trae={summary['rae']}")
    return 0


def cmd_bench(scenario: ConfigManager, args: argparse.Namespace) -> int:
    rows = parse_int_list(args.rows)
    summary = run_bench(
        rows,
        args.cols,
        args.steps,
        scenario.batch_config(),
        scenario.online_config(),
        scenario.corruption_spec(),
        scenario.output_dir,
    )
    print(f"slope={summary['slope']}\tquartile_ratio={summary['quartile_ratio']}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "init": cmd_init,
    "impute": cmd_impute,
    "forecast": cmd_forecast,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        scenario = scenario_from_args(args)
        return _COMMANDS[args.command](scenario, args)
    except (SofiaError, ValueError) as e:
        logger.error(f"Sofia: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
