import copy
import json
import pandas as pd
import pytest
from dercoopt_hub.cli.interface import EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, run
from dercoopt_hub.cli.scenario_config import ScenarioConfig
from dercoopt_hub.core.exceptions import ConfigError


SCENARIO = {
    "schema_version": 1,
    "horizon": 4,
    "tariff": {"retail_rate": 0.4, "export_rate": 0.1, "avoided_cost_rate": 0.05},
    "devices": [{"kind": "quadratic", "alpha": 2.0, "beta": 1.0, "cap": 2.0}],
    "battery": {"capacity": 4.0, "charge_limit": 0.5, "discharge_limit": 0.5,
                "salvage_rate": 0.2, "initial_soc": 2.0},
    "renewable": {"kind": "profile", "mean": [0.5, 2.0, 3.0, 1.0],
                  "std": [0.1, 0.3, 0.4, 0.2]},
    "simulation": {"n_paths": 3, "seed": 7, "algorithms": ["mco", "passive_sdg"]},
}


def _write_config(tmp_path, **changes):
    data = copy.deepcopy(SCENARIO)
    data.update(changes)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def _run(command, config, out, *extra):
    return run([command, "--config", config, "--out", str(out), "--jobs", "1", *extra])


def test_thresholds_table(tmp_path, capsys):
    out = tmp_path / "out"
    assert _run("thresholds", _write_config(tmp_path), out) == EXIT_OK
    frame = pd.read_csv(out / "thresholds.csv")
    assert len(frame) == 8
    raw = frame[(frame["t"] == 0) & (frame["limits"] == "raw")].iloc[0]
    expected = [1.1, 1.3, 1.8, 1.8, 2.3, 2.4]
    columns = ["delta_plus", "sigma_plus", "sigma_plus_o", "sigma_minus_o", "sigma_minus",
               "delta_minus"]
    assert raw[columns].tolist() == pytest.approx(expected, abs=1e-9)
    assert "A1: ok" in capsys.readouterr().out


def test_thresholds_single_interval(tmp_path):
    out = tmp_path / "out"
    assert _run("thresholds", _write_config(tmp_path), out, "--t", "2") == EXIT_OK
    frame = pd.read_csv(out / "thresholds.csv")
    assert frame["t"].unique().tolist() == [2]
    assert _run("thresholds", _write_config(tmp_path), out, "--t", "9") == EXIT_CONFIG


def test_thresholds_report_relaxed_regime_when_a1_fails(tmp_path, capsys):
    out = tmp_path / "out"
    battery = dict(SCENARIO["battery"], salvage_rate=0.05)
    assert _run("thresholds", _write_config(tmp_path, battery=battery), out) == EXIT_OK
    printed = capsys.readouterr().out
    assert "случай 1a" in printed
    assert "батарея всегда разряжается" in printed
    assert len(pd.read_csv(out / "thresholds.csv")) == 8
    summary = json.loads((out / "thresholds_summary.json").read_text(encoding="utf-8"))
    assert summary["metrics"]["a1_case"] == "1a"


def test_missing_config_is_a_config_error(tmp_path):
    assert _run("thresholds", str(tmp_path / "absent.json"), tmp_path / "out") == EXIT_CONFIG


def test_invalid_config_is_a_config_error(tmp_path):
    config = _write_config(tmp_path, tariff=[{"retail_rate": 0.4, "export_rate": 0.35},
                                             {"retail_rate": 0.3, "export_rate": 0.1}],
                           horizon=2)
    assert _run("thresholds", config, tmp_path / "out") == EXIT_CONFIG


def test_unknown_policy(tmp_path):
    config = _write_config(tmp_path)
    assert _run("simulate", config, tmp_path / "out", "--policy", "oracle") == EXIT_CONFIG


def test_oversized_dp_is_refused(tmp_path):
    config = _write_config(tmp_path, dp={"soc_step": 1e-8, "action_step": 0.1, "levels": 2})
    assert _run("simulate", config, tmp_path / "out", "--policy", "dp") == EXIT_RESOURCE


def test_simulate_is_reproducible(tmp_path):
    config = _write_config(tmp_path)
    first, second = tmp_path / "first", tmp_path / "second"
    assert _run("simulate", config, first, "--emit-trajectories") == EXIT_OK
    assert _run("simulate", config, second, "--emit-trajectories") == EXIT_OK
    assert (first / "rewards.csv").read_bytes() == (second / "rewards.csv").read_bytes()
    assert ((first / "trajectories" / "mco_path_2.csv").read_bytes()
            == (second / "trajectories" / "mco_path_2.csv").read_bytes())
    assert len(pd.read_csv(first / "rewards.csv")) == 3


def test_simulate_summary(tmp_path):
    out = tmp_path / "out"
    assert _run("simulate", _write_config(tmp_path), out, "--seed", "3", "--paths", "2") == 0
    summary = json.loads((out / "simulate_summary.json").read_text(encoding="utf-8"))
    assert set(summary) == {"schema_version", "command", "seed", "config", "metrics",
                            "generated_at"}
    assert summary["seed"] == 3
    assert summary["config"]["simulation"]["n_paths"] == 2
    assert summary["metrics"]["n_paths"] == 2


def test_simulate_dp_reports_expected_value(tmp_path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, dp={"soc_step": 0.25, "action_step": 0.25, "levels": 3})
    assert _run("simulate", config, out, "--policy", "dp") == EXIT_OK
    summary = json.loads((out / "simulate_summary.json").read_text(encoding="utf-8"))
    assert "dp_expected_value" in summary["metrics"]
    values = pd.read_csv(out / "dp_values.csv")
    assert list(values.columns) == ["t", "soc", "g", "value"]
    assert sorted(values["t"].unique().tolist()) == [0, 1, 2, 3, 4]
    assert values["soc"].min() == 0.0 and values["soc"].max() == 4.0


def test_compare_outputs(tmp_path):
    out = tmp_path / "out"
    assert _run("compare", _write_config(tmp_path), out) == EXIT_OK
    gains = pd.read_csv(out / "surplus_gains.csv")
    assert list(gains.columns) == ["customer_type", "gain_percent"]
    assert "solar_exporter" not in gains["customer_type"].tolist()
    assert gains.set_index("customer_type").loc["consumer", "gain_percent"] == 0.0
    assert list(pd.read_csv(out / "z_histogram.csv").columns) == [
        "customer_type", "bin_start", "bin_end", "count"]
    assert list(pd.read_csv(out / "rpf.csv").columns) == ["customer_type", "t", "mean_export"]
    net_cost = pd.read_csv(out / "net_cost.csv")
    assert list(net_cost.columns) == ["customer_type", "t", "bill_savings", "avoided_value",
                                      "psi"]
    assert "consumer" not in net_cost["customer_type"].tolist()


def test_compare_with_peak_window_includes_solar_exporter(tmp_path):
    out = tmp_path / "out"
    simulation = dict(SCENARIO["simulation"], peak_window=[3])
    assert _run("compare", _write_config(tmp_path, simulation=simulation), out) == EXIT_OK
    assert "solar_exporter" in pd.read_csv(out / "surplus_gains.csv")["customer_type"].tolist()


def test_gap_rows_per_sweep_level(tmp_path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, sweep={"limits": ["C-8", 1.0]})
    assert _run("gap", config, out) == EXIT_OK
    summary = pd.read_csv(out / "gap_summary.csv")
    assert len(summary) == 4
    assert sorted(summary["charge_limit"].unique().tolist()) == [0.5, 1.0]
    report = pd.read_csv(out / "gap_report.csv")
    assert len(report) == 12
    assert (report["reward"] <= report["bound"] + 1e-6).all()


def test_gap_is_reproducible(tmp_path):
    config = _write_config(tmp_path, sweep={"limits": ["C-8", 1.0]})
    first, second = tmp_path / "first", tmp_path / "second"
    assert _run("gap", config, first) == EXIT_OK
    assert _run("gap", config, second) == EXIT_OK
    for name in ("gap_report.csv", "gap_summary.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_gap_needs_two_algorithms(tmp_path):
    simulation = dict(SCENARIO["simulation"], algorithms=["mco"])
    config = _write_config(tmp_path, simulation=simulation)
    assert _run("gap", config, tmp_path / "out") == EXIT_CONFIG


def test_config_round_trip():
    config = ScenarioConfig.from_dict(copy.deepcopy(SCENARIO))
    data = config.to_dict()
    assert ScenarioConfig.from_dict(data).to_dict() == data
    assert len(data["tariff"]) == 4 and len(data["fleets"]) == 4


def test_config_overrides():
    config = ScenarioConfig.from_dict(copy.deepcopy(SCENARIO))
    changed = config.with_overrides(seed=5, n_paths=None, output_dir="elsewhere")
    assert (changed.seed, changed.n_paths, changed.output_dir) == (5, 3, "elsewhere")
    with pytest.raises(ConfigError):
        config.with_overrides(colour="red")


@pytest.mark.parametrize("changes", [
    {"simulation": {"algorithms": ["oracle"]}},
    {"simulation": {"n_paths": 0}},
    {"simulation": {"peak_window": [7]}},
    {"battery": {"capacity": 4.0, "charge_limit": 0.5, "discharge_limit": 0.5,
                 "initial_soc": 5.0}},
    {"renewable": {"kind": "profile", "mean": [1.0]}},
    {"tariff": {"retail_rate": -0.4, "export_rate": 0.1}},
    {"schema_version": 2},
])
def test_config_validation(changes):
    data = copy.deepcopy(SCENARIO)
    data.update(changes)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(data)


def test_solar_shortcut_expands_to_a_profile():
    data = copy.deepcopy(SCENARIO)
    data.update(horizon=24, renewable={"kind": "profile", "solar": {"peak": 3.0, "cv": 0.2}})
    config = ScenarioConfig.from_dict(data)
    assert config.renewable.mean.size == 24
    assert config.renewable.mean.max() <= 3.0
