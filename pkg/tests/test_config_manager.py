"""场景配置读取测试：缺省值、分组优先级、覆盖层与校验错误。"""

import json
from pathlib import Path

import pytest

from core.config_manager import ConfigManager, load_scenario, parse_int_list
from core.errors import ConfigurationError


def test_defaults_follow_recommended_parameters():
    scenario = ConfigManager({"name": "plain"})

    assert scenario.source_kind == "synthetic"
    assert scenario.rank == 3
    assert scenario.period == 30
    assert (scenario.lambda1, scenario.lambda2, scenario.lambda3) == (1e-3, 1e-3, 10.0)
    assert scenario.mu == 0.1
    assert scenario.phi == 0.01
    assert scenario.huber_k == 2.0
    assert scenario.biweight_c == 2.52
    assert scenario.decay == 0.85
    assert scenario.preclean is True
    assert scenario.vanilla_init is False
    assert scenario.output_dir.endswith("plain")


def test_period_falls_back_to_synthetic_group():
    scenario = ConfigManager({"synthetic": {"period": 12, "rank": 4}})

    assert scenario.period == 12
    assert scenario.rank == 4
    assert scenario.batch_config().startup_length == 36


def test_overrides_do_not_touch_base():
    base = ConfigManager({"name": "base", "model": {"rank": 3, "lambda1": 0.5}})

    view = base.with_overrides({"rank": 8, "online": {"mu": 0.02}})

    assert view.rank == 8
    assert view.lambda1 == 0.5
    assert view.mu == 0.02
    assert base.rank == 3
    assert base.mu == 0.1
    assert view.as_dict()["model"] == {"rank": 8, "lambda1": 0.5}


def test_overrides_stack():
    view = ConfigManager({}).with_overrides({"seed": 1}).with_overrides({"repeats": 4})

    assert view.seed == 1
    assert view.repeats == 4


def test_online_config_carries_shared_lambdas():
    scenario = ConfigManager({"model": {"lambda1": 0.2, "lambda3": 4.0}, "online": {"phi": 0.05}})

    online = scenario.online_config()

    assert online.lambda1 == 0.2
    assert online.sigma_init == pytest.approx(0.04)
    assert online.robust.phi == 0.05


def test_corruption_spec_uses_run_seed():
    scenario = ConfigManager({"corruption": {"missing_pct": 50, "outlier_pct": 10, "outlier_mag": 3}, "run": {"seed": 9}})

    spec = scenario.corruption_spec()

    assert spec.seed == 9
    assert not spec.is_clean
    assert scenario.corruption_spec(seed=2).seed == 2


def test_invalid_value_becomes_configuration_error():
    scenario = ConfigManager({"name": "bad", "online": {"mu": -1.0}})

    with pytest.raises(ConfigurationError, match="bad"):
        scenario.online_config()


def test_unknown_source_kind():
    with pytest.raises(ConfigurationError):
        ConfigManager({"source": {"kind": "kafka"}}).source_kind


def test_load_scenario_rejects_non_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text(json.dumps([1, 2]), encoding="utf-8")

    with pytest.raises(ConfigurationError):
        load_scenario(str(path))


def test_load_scenario_rejects_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")

    with pytest.raises(ConfigurationError):
        load_scenario(str(path))


def test_load_scenario_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_scenario(str(tmp_path / "nope.json"))


def test_parse_int_list():
    assert parse_int_list("4, 8,12") == (4, 8, 12)
    with pytest.raises(ConfigurationError):
        parse_int_list("4,x")
    with pytest.raises(ConfigurationError):
        parse_int_list("0,3")
    with pytest.raises(ConfigurationError):
        parse_int_list("")


@pytest.mark.parametrize("name", ["synthetic_recovery", "synthetic_forecast", "bench", "traffic_triples"])
def test_bundled_scenarios_are_valid(name):
    path = Path(__file__).resolve().parent.parent / "docs" / "scenarios" / f"{name}.json"

    scenario = load_scenario(str(path))

    assert scenario.batch_config().startup_length == 3 * scenario.period
    scenario.online_config()
    scenario.corruption_spec()
    if scenario.source_kind == "synthetic":
        scenario.synth_config()
