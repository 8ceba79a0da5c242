import json
import os

import pytest

import main
from core.checkpoint import load_state
from harness.ingest import ingest_triples


def _config(tmp_path, **extra):
    config = {
        "synthetic": {"shape": [3, 2], "length": 14, "rank": 2, "period": 4,
                      "amplitude_range": [0.2, 0.5], "offset_range": [1.0, 1.5]},
        "model": {"rank": 2},
        "online": {"mu": 0.01},
        "output": {"dir": str(tmp_path / "out")},
    }
    config.update(extra)
    path = tmp_path / "small.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


def test_synth_writes_three_triple_files(tmp_path):
    code = main.main(["synth", "--config", _config(tmp_path), "--missing-pct", "50", "--outlier-pct", "20", "--outlier-mag", "2"])

    assert code == 0
    out = tmp_path / "out"
    observed = ingest_triples(str(out / "observed.csv"), shape=(3, 2), period=4)
    truth = ingest_triples(str(out / "truth.csv"), shape=(3, 2), period=4)
    assert truth.n_observed == 3 * 2 * 14
    assert observed.n_observed == 3 * 14
    assert (out / "outliers.csv").exists()


def test_init_saves_state(tmp_path):
    code = main.main(["init", "--config", _config(tmp_path)])

    assert code == 0
    state = load_state(str(tmp_path / "out" / "state.bin"))
    assert state.t == 12
    with open(tmp_path / "out" / "init.json", encoding="utf-8") as f:
        info = json.load(f)
    assert info["startup_length"] == 12
    assert len(info["hw"]["alpha"]) == 2


def test_flags_override_scenario(tmp_path):
    args = main.build_parser().parse_args(["impute", "--config", _config(tmp_path), "--rank", "3", "--no-preclean"])

    scenario = main.scenario_from_args(args)

    assert scenario.rank == 3
    assert scenario.preclean is False
    assert scenario.mu == 0.01


def test_impute_prints_summary(tmp_path, capsys):
    code = main.main(["impute", "--config", _config(tmp_path), "--omit-timing"])

    assert code == 0
    assert "rae=" in capsys.readouterr().out
    assert os.path.exists(tmp_path / "out" / "seed_0" / "steps.csv")


def test_configuration_error_exits_with_two(tmp_path):
    assert main.main(["impute", "--config", str(tmp_path / "absent.json")]) == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main.main(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.startswith("sofia ")


def test_impute_resumes_from_init_state(tmp_path, capsys):
    config = _config(tmp_path)
    assert main.main(["init", "--config", config]) == 0
    resumed_dir = tmp_path / "resumed"

    code = main.main([
        "impute", "--config", config, "--omit-timing",
        "--resume", str(tmp_path / "out" / "state.bin"), "--output-dir", str(resumed_dir),
    ])

    assert code == 0
    assert "resumed_from=12" in capsys.readouterr().out
    assert main.main(["impute", "--config", config, "--omit-timing"]) == 0
    full = (tmp_path / "out" / "seed_0" / "steps.csv").read_text(encoding="utf-8").splitlines()
    resumed = (resumed_dir / "steps.csv").read_text(encoding="utf-8").splitlines()
    assert resumed[0] == full[0]
    assert resumed[1:] == full[1 + 12:]


def test_resume_cannot_combine_with_rank_sweep(tmp_path):
    config = _config(tmp_path)
    assert main.main(["init", "--config", config]) == 0

    code = main.main(["impute", "--config", config, "--ranks", "2,3", "--resume", str(tmp_path / "out" / "state.bin")])

    assert code == 2
