import time
import numpy as np
import pytest
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.mco import StageRecord, Trajectory, run_mco, simulate, stage_reward
from dercoopt_hub.core.policy import Decision, decide
from dercoopt_hub.core.storage import Limits
from dercoopt_hub.core.tariff import TariffInterval
from tests.conftest import make_battery, make_fleet, make_schedule


ATOL = 1e-9


def test_single_stage_reward(fleet, battery):
    trajectory = run_mco(make_schedule(1), fleet, battery, 2.0, [0.0])
    record = trajectory.records[0]
    assert record.d == pytest.approx((1.6,), abs=ATOL)
    assert record.e == -0.5
    assert trajectory.terminal_salvage == pytest.approx(-0.1, abs=ATOL)
    assert trajectory.cumulative_reward == pytest.approx(1.38, abs=ATOL)


def test_zero_renewable_repeats_until_clipped(fleet, battery):
    trajectory = run_mco(make_schedule(6), fleet, battery, 2.0, [0.0] * 6)
    assert [r.e for r in trajectory.records] == pytest.approx([-0.5] * 4 + [0.0] * 2, abs=ATOL)
    assert [r.soc_after for r in trajectory.records] == pytest.approx(
        [1.5, 1.0, 0.5, 0.0, 0.0, 0.0], abs=ATOL)
    assert all(r.d == pytest.approx((1.6,), abs=ATOL) for r in trajectory.records)


def test_zero_salvage_routes_to_always_discharge(fleet):
    spec = make_battery(salvage_rate=0.0)
    trajectory = run_mco(make_schedule(3), fleet, spec, 2.0, [1.0, 2.0, 3.0])
    assert {r.branch for r in trajectory.records} == {"relaxed_1a"}
    assert all(r.e == -0.5 for r in trajectory.records)


def test_soc_chain_is_consistent(fleet):
    spec = make_battery(capacity=2.0, charge_eff=0.9, discharge_eff=0.95)
    rng = np.random.default_rng(5)
    path = rng.uniform(0.0, 4.0, 24).tolist()
    trajectory = run_mco(make_schedule(24), fleet, spec, 1.0, path)
    soc = 1.0
    for record in trajectory.records:
        assert record.soc_before == soc
        assert 0.0 <= record.soc_after <= 2.0
        soc = record.soc_after
    assert trajectory.final_soc == soc
    assert trajectory.terminal_salvage == pytest.approx(0.2 * (soc - 1.0), abs=ATOL)


def test_decisions_are_causal(fleet, battery):
    rng = np.random.default_rng(6)
    path = rng.uniform(0.0, 4.0, 10)
    other = path.copy()
    other[5:] = rng.permutation(other[5:])
    first = run_mco(make_schedule(10), fleet, battery, 2.0, path.tolist())
    second = run_mco(make_schedule(10), fleet, battery, 2.0, other.tolist())
    assert first.records[:5] == second.records[:5]


def test_stage_reward_examples(fleet, tariff):
    decision = Decision((1.8,), 0.0, 0.0)
    assert stage_reward(tariff, fleet, decision, 1.8) == pytest.approx(1.98, abs=ATOL)

    discharging = Decision((1.6,), -0.5, 0.6)
    base = stage_reward(tariff, fleet, discharging, 0.5)
    assert stage_reward(tariff, fleet, discharging, 0.5, 0.01) == pytest.approx(base - 0.005,
                                                                              abs=ATOL)
    assert stage_reward(tariff, fleet, decision, 1.8, 0.5) == stage_reward(tariff, fleet,
                                                                           decision, 1.8)


def test_degradation_cost_is_booked(fleet):
    spec = make_battery(degradation_cost_rate=0.01)
    plain = run_mco(make_schedule(1), fleet, make_battery(), 2.0, [0.0])
    worn = run_mco(make_schedule(1), fleet, spec, 2.0, [0.0])
    assert worn.cumulative_reward == pytest.approx(plain.cumulative_reward - 0.005, abs=ATOL)


def test_simulate_bills_on_metered_renewable(fleet, battery):
    def idle(t, fleet, tariff, state, limits, g):
        d = (1.0,)
        return Decision(d, 0.0, 1.0 - g)

    trajectory = simulate(make_schedule(2), fleet, battery, 2.0, [3.0, 3.0], idle, "idle",
                          billed_g=[0.0, 0.0])
    assert trajectory.g_path == [0.0, 0.0]
    assert trajectory.net_consumption == [1.0, 1.0]
    assert trajectory.payments == pytest.approx([0.4, 0.4])


@pytest.mark.parametrize("s0, path", [(2.0, [0.0]), (5.0, [0.0, 0.0]), (2.0, [0.0, -1.0])])
def test_run_mco_validates_inputs(fleet, battery, s0, path):
    with pytest.raises(DomainError):
        run_mco(make_schedule(2), fleet, battery, s0, path)


def test_trajectory_rows(battery):
    fleet = make_fleet((2.0, 1.0, 2.0), (1.0, 1.0, 1.0))
    trajectory = run_mco(make_schedule(3), fleet, battery, 2.0, [0.0, 1.0, 3.0])
    rows = trajectory.to_rows()
    assert list(rows[0]) == ["t", "g", "d_1", "d_2", "e", "z", "soc", "stage_reward"]
    assert [row["t"] for row in rows] == [0, 1, 2]
    data = trajectory.to_dict()
    assert data["policy"] == "mco"
    assert data["cumulative_reward"] == trajectory.cumulative_reward
    assert len(data["records"]) == 3


def test_trajectory_from_records():
    record = StageRecord(0, 1.0, (1.0,), 0.0, 0.0, 2.0, 2.0, 0.0, 1.5)
    trajectory = Trajectory([record], 0.0)
    assert trajectory.initial_soc == 2.0
    assert trajectory.cumulative_reward == 1.5
    assert len(trajectory) == 1


@pytest.mark.slow
def test_decide_cost_is_linear_in_devices():
    rng = np.random.default_rng(7)
    tariff = TariffInterval(0.4, 0.1)
    spec = make_battery(limit=1.0)
    timings = {}
    for size in (10, 100, 1000):
        fleet = make_fleet(*[(rng.uniform(1.0, 3.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
                             for _ in range(size)])
        samples = []
        for g in np.linspace(0.0, fleet.total_cap, 7):
            start = time.perf_counter()
            decide(fleet, tariff, spec, Limits(1.0, 1.0), float(g))
            samples.append(time.perf_counter() - start)
        timings[size] = float(np.median(samples))
    # tenfold more devices may cost at most 3 x 10 more time
    assert timings[100] <= 30 * timings[10]
    assert timings[1000] <= 30 * timings[100]
