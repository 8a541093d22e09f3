import pickle
from pathlib import Path
import numpy as np
import pytest
from dercoopt_hub.baselines.foresight import perfect_foresight_bound
from dercoopt_hub.baselines.mpc import PathForecaster, run_mpc
from dercoopt_hub.cli.scenario_config import ScenarioConfig
from dercoopt_hub.core.exceptions import (
    ConfigError,
    DomainError,
    NumericError,
    ResourceGuardError,
    UndefinedGapError,
)
from dercoopt_hub.core.mco import StageRecord, Trajectory
from dercoopt_hub.scenario.metrics import (
    gap,
    net_consumption_histogram,
    rpf_records,
    summarize_gaps,
    surplus_gain_table,
    utility_net_cost,
)
from dercoopt_hub.scenario.renewables import (
    RenewableModel,
    default_solar_profile,
    quantize_to_markov,
    sample_paths,
)
from dercoopt_hub.scenario.runner import (
    ExperimentInputs,
    ExperimentRunner,
    PolicyOptions,
    _bound_task,
    resolve_limit_level,
)
from tests.conftest import make_battery, make_schedule


SCENARIOS = Path(__file__).resolve().parent.parent / "data" / "scenarios"


def _trajectory(z_values, g_values=None, payments=None):
    g_values = g_values or [0.0] * len(z_values)
    payments = payments or [0.0] * len(z_values)
    records = [StageRecord(t, g, (), 0.0, z, 0.0, 0.0, p, 0.0)
               for t, (z, g, p) in enumerate(zip(z_values, g_values, payments))]
    return Trajectory(records, 0.0, initial_soc=0.0)


# Renewables

def test_zero_std_paths_equal_the_mean():
    model = RenewableModel(mean=[0.5, 2.0, 3.0], std=[0.0, 0.0, 0.0])
    assert np.array_equal(sample_paths(model, 3, 4, seed=1), [[0.5, 2.0, 3.0]] * 4)


def test_sampling_is_seeded_per_path():
    model = RenewableModel(mean=[0.5, 2.0, 3.0], std=[0.5, 0.5, 0.5])
    paths = sample_paths(model, 3, 5, seed=9)
    assert np.array_equal(paths, sample_paths(model, 3, 5, seed=9))
    assert np.array_equal(paths[:3], sample_paths(model, 3, 3, seed=9))
    assert not np.array_equal(paths, sample_paths(model, 3, 5, seed=10))
    assert np.all(paths >= 0.0)


def test_scaled_models():
    model = RenewableModel(mean=[0.5, 2.0], std=[0.2, 0.2])
    assert np.array_equal(sample_paths(model.scaled(0.0, 0.0), 2, 3, seed=0), np.zeros((3, 2)))
    doubled = sample_paths(model.scaled(2.0, 0.0), 2, 1, seed=0)
    assert np.array_equal(doubled, [[1.0, 4.0]])
    with pytest.raises(DomainError):
        model.scaled(-1.0, 1.0)


def test_renewable_validation():
    with pytest.raises(DomainError):
        RenewableModel(kind="wind", mean=[1.0])
    with pytest.raises(DomainError):
        RenewableModel(mean=[1.0, 2.0], std=[0.1])
    with pytest.raises(DomainError):
        RenewableModel(mean=[-1.0])
    with pytest.raises(DomainError):
        sample_paths(RenewableModel(mean=[1.0]), 2, 1, seed=0)


def test_quantized_chain_is_stochastic():
    model = RenewableModel(mean=[0.0, 1.0, 2.0, 1.0], std=[0.0, 0.3, 0.5, 0.3])
    chain = quantize_to_markov(model, 4, 6)
    assert chain.levels == 6
    assert chain.support[0] == 0.0
    for t in range(3):
        assert np.allclose(chain.transition_at(t).sum(axis=1), 1.0)
    assert chain.initial[0] == 1.0
    with pytest.raises(DomainError):
        quantize_to_markov(model, 4, 1)


def test_quantizing_no_generation_gives_a_single_level():
    chain = quantize_to_markov(RenewableModel(mean=[0.0, 0.0]), 2, 5)
    assert chain.support.tolist() == [0.0]


def test_default_solar_profile_shape():
    mean, std = default_solar_profile(24, 4.0, cv=0.25)
    assert mean.shape == (24,)
    assert np.all(mean[:6] == 0.0) and np.all(mean[18:] == 0.0)
    assert np.all(mean[6:18] > 0.0)
    assert mean.max() <= 4.0 and mean.argmax() in (11, 12)
    assert np.allclose(std, 0.25 * mean)
    with pytest.raises(DomainError):
        default_solar_profile(0, 1.0)


# Metrics

def test_gap_examples():
    assert gap(99.0, 100.0) == pytest.approx(-1.0)
    assert gap(100.0, 100.0) == 0.0
    with pytest.raises(UndefinedGapError) as excinfo:
        gap(1.0, 0.0, path_id=3)
    assert excinfo.value.path_id == 3


def test_summarize_gaps():
    report = summarize_gaps("mco", [-1.0, -3.0])
    assert report.mean == pytest.approx(-2.0)
    assert report.std == pytest.approx(1.0)
    with pytest.raises(DomainError):
        summarize_gaps("mco", [])


def test_surplus_gain_table():
    gains = surplus_gain_table({"consumer": [1.0, 2.0], "active_sdg": [2.0, 2.0]})
    assert gains == {"consumer": 0.0, "active_sdg": pytest.approx(50.0)}
    with pytest.raises(NumericError):
        surplus_gain_table({"consumer": [0.0, 1.0]})
    with pytest.raises(DomainError):
        surplus_gain_table({"active_sdg": [1.0]})
    with pytest.raises(DomainError):
        surplus_gain_table({"consumer": [1.0, 2.0], "active_sdg": [1.0]})


def test_histogram_counts_and_zero_mass():
    hist = net_consumption_histogram([_trajectory([0.0, 1e-12, 0.25, -0.25])], 0.1)
    assert hist.total == 4
    assert hist.count == [1, 2, 1]
    assert hist.bin_start == pytest.approx([-0.3, 0.0, 0.2])
    assert hist.net_zero_mass == 0.5
    with pytest.raises(DomainError):
        net_consumption_histogram([], 0.0)


def test_consumer_histogram_is_a_single_spike(fleet, battery):
    schedule = make_schedule(4)
    paths = np.random.default_rng(0).uniform(0.0, 3.0, (3, 4))
    runner = ExperimentRunner(ExperimentInputs(schedule, [fleet] * 4, battery, 2.0), jobs=1)
    runs = runner.run_policy("consumer", paths)
    hist = net_consumption_histogram(runs, 0.1)
    assert hist.total == 12
    assert hist.count == [12]


def test_rpf_mean_export():
    report = rpf_records([_trajectory([-0.5, 1.0]), _trajectory([-0.7, 2.0])])
    assert len(report.records) == 4
    assert report.mean_by_interval["mean_export"].tolist() == pytest.approx([0.6, 0.0])


def test_utility_net_cost_example():
    with_der = _trajectory([0.0], g_values=[4.0], payments=[0.5])
    baseline = _trajectory([0.0], payments=[1.5])
    series = utility_net_cost(with_der, baseline, [0.05])
    assert series.bill_savings == pytest.approx([1.0])
    assert series.avoided_value == pytest.approx([0.2])
    assert series.psi == pytest.approx([0.8])
    assert list(series.to_frame().columns) == ["t", "bill_savings", "avoided_value", "psi"]
    with pytest.raises(DomainError):
        utility_net_cost(with_der, baseline, [0.05, 0.05])


# Runner

@pytest.mark.parametrize("level, expected", [("C-8", 5.0), ("c-4", 10.0), ("1.5", 1.5),
                                             (2.0, 2.0)])
def test_resolve_limit_level(level, expected):
    assert resolve_limit_level(level, 40.0) == expected


@pytest.mark.parametrize("level", ["C-0", "C-x", "fast"])
def test_resolve_limit_level_rejects_bad_markers(level):
    with pytest.raises(DomainError):
        resolve_limit_level(level, 40.0)


def test_runner_keeps_path_order_across_workers(fleet, battery):
    inputs = ExperimentInputs(make_schedule(4), [fleet] * 4, battery, 2.0)
    paths = np.random.default_rng(1).uniform(0.0, 3.0, (6, 4))
    serial = ExperimentRunner(inputs, jobs=1).run_policy("mco", paths)
    pooled = ExperimentRunner(inputs, jobs=3).run_policy("mco", paths)
    assert [t.cumulative_reward for t in pooled] == [t.cumulative_reward for t in serial]
    assert [t.g_path for t in pooled] == paths.tolist()


def test_runner_rejects_unknown_policy_and_missing_options(fleet, battery):
    runner = ExperimentRunner(ExperimentInputs(make_schedule(2), [fleet] * 2, battery, 2.0),
                              jobs=1)
    paths = np.zeros((1, 2))
    with pytest.raises(DomainError):
        runner.run_policy("oracle", paths)
    with pytest.raises(DomainError):
        runner.run_policy("dp", paths, PolicyOptions())
    with pytest.raises(DomainError):
        runner.run_policy("mpc", paths, PolicyOptions())


def test_gap_reports_per_algorithm(fleet):
    spec = make_battery(capacity=100.0)
    inputs = ExperimentInputs(make_schedule(3), [fleet] * 3, spec, 50.0)
    paths = np.random.default_rng(2).uniform(0.5, 3.0, (2, 3))
    bounds, trajectories, reports = ExperimentRunner(inputs, jobs=1).gap_reports(
        ["mco", "passive_sdg"], paths)
    assert len(bounds) == 2
    assert set(reports) == {"mco", "passive_sdg"}
    assert len(trajectories["mco"]) == 2
    assert reports["mco"].mean == pytest.approx(0.0, abs=1e-4)
    assert reports["passive_sdg"].mean <= reports["mco"].mean + 1e-6


def test_bound_task_returns_the_bound(fleet, battery):
    inputs = ExperimentInputs(make_schedule(1), [fleet], battery, 2.0)
    assert _bound_task((0, inputs, [0.0])) == pytest.approx(1.38, abs=1e-6)


@pytest.mark.parametrize("error", [
    ResourceGuardError(10, 5, "hint"),
    NumericError("stalled", {"iterations": 200}),
    UndefinedGapError(4),
    ConfigError("bad"),
])
def test_errors_survive_pickling(error):
    restored = pickle.loads(pickle.dumps(error))
    assert type(restored) is type(error)
    assert str(restored) == str(error)
    assert restored.__dict__ == error.__dict__


@pytest.mark.slow
def test_mco_gap_vanishes_on_many_paths_when_soc_never_binds(fleet):
    spec = make_battery(capacity=100.0)
    inputs = ExperimentInputs(make_schedule(8), [fleet] * 8, spec, 50.0)
    paths = sample_paths(RenewableModel(mean=[0.5, 1.0, 2.0, 3.0, 3.0, 2.0, 1.0, 0.5],
                                        std=[0.3] * 8), 8, 100, seed=21)
    _, _, reports = ExperimentRunner(inputs, jobs=2).gap_reports(["mco", "passive_sdg"], paths)
    assert len(reports["mco"].gaps) == 100
    assert reports["mco"].mean == pytest.approx(0.0, abs=1e-4)
    assert max(abs(value) for value in reports["mco"].gaps) <= 1e-3
    assert reports["passive_sdg"].mean <= reports["mco"].mean + 1e-6


# Binding SoC scenario

@pytest.mark.slow
def test_binding_soc_gap_widens_with_battery_limits():
    config = ScenarioConfig.load(str(SCENARIOS / "binding_soc.json"))
    paths = sample_paths(config.renewable, config.horizon, config.n_paths, config.seed)
    means = []
    for level in (0.1, 0.5, 1.0, 2.0):
        battery = config.battery.with_limits(level, level)
        runner = ExperimentRunner(config.experiment_inputs(battery), jobs=1)
        _, _, reports = runner.gap_reports(["mco"], paths)
        means.append(reports["mco"].mean)
    assert all(later <= earlier + 1e-3 for earlier, later in zip(means, means[1:]))
    assert means[-1] < means[0]


@pytest.mark.slow
def test_binding_soc_full_window_mpc_closes_the_gap():
    config = ScenarioConfig.load(str(SCENARIOS / "binding_soc.json"))
    inputs = config.experiment_inputs()
    paths = sample_paths(config.renewable, config.horizon, 5, config.seed)
    for path in paths.tolist():
        mpc = run_mpc(inputs.schedule, inputs.fleets, inputs.spec, inputs.s0,
                      PathForecaster(path), path, config.horizon)
        bound = perfect_foresight_bound(inputs.schedule, inputs.fleets, inputs.spec, inputs.s0,
                                        path)
        assert gap(mpc.cumulative_reward, bound) == pytest.approx(0.0, abs=1e-3)
