"""
Sequential myopic co-optimization over a renewable path.

At every interval the charge/discharge limits are clipped to what the
current SoC allows, the closed-form policy decides (d, e), the battery is
stepped and the stage surplus is booked. Leftover energy is credited at the
salvage rate at the end of the horizon.
"""

import logging
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple
from dercoopt_hub.core.demand import DeviceFleet, FleetSource, fleet_schedule
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.policy import Decision, decide, decide_relaxed_a1
from dercoopt_hub.core.storage import (
    A1Case,
    BatterySpec,
    BatteryState,
    Limits,
    check_a1,
    clip_limits,
    step_soc,
)
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule, payment, surplus
from dercoopt_hub.core.utils import exact_sum, negative_part, positive_part, require_finite
from dercoopt_hub.decorators import log_operation
from dercoopt_hub.logging_config import get_logger


logger = get_logger(__name__)


class StageRecord(NamedTuple):
    t: int
    g: float
    d: Tuple[float, ...]
    e: float
    z: float
    soc_before: float
    soc_after: float
    payment: float
    stage_reward: float
    branch: str = ""


class Trajectory:
    """Stage records of one policy run plus the terminal salvage credit"""

    def __init__(self, records: Sequence[StageRecord], terminal_salvage: float,
                 policy: str = "", initial_soc: Optional[float] = None):
        self._records: Tuple[StageRecord, ...] = tuple(records)
        self._terminal_salvage = terminal_salvage
        self._policy = policy
        self._initial_soc = (self._records[0].soc_before if initial_soc is None and self._records
                             else initial_soc)

    @property
    def records(self) -> Tuple[StageRecord, ...]:
        return self._records

    @property
    def policy(self) -> str:
        return self._policy

    @property
    def horizon(self) -> int:
        return len(self._records)

    @property
    def terminal_salvage(self) -> float:
        return self._terminal_salvage

    @property
    def cumulative_reward(self) -> float:
        return exact_sum([r.stage_reward for r in self._records] + [self._terminal_salvage])

    @property
    def initial_soc(self) -> Optional[float]:
        return self._initial_soc

    @property
    def final_soc(self) -> Optional[float]:
        return self._records[-1].soc_after if self._records else self._initial_soc

    @property
    def g_path(self) -> List[float]:
        return [r.g for r in self._records]

    @property
    def net_consumption(self) -> List[float]:
        return [r.z for r in self._records]

    @property
    def payments(self) -> List[float]:
        return [r.payment for r in self._records]

    def to_rows(self) -> List[Dict[str, Any]]:
        """One flat row per stage: t, g, d_1..d_K, e, z, soc, stage_reward"""
        k_max = max((len(r.d) for r in self._records), default=0)
        rows = []
        for r in self._records:
            row: Dict[str, Any] = {"t": r.t, "g": r.g}
            for k in range(k_max):
                row[f"d_{k + 1}"] = r.d[k] if k < len(r.d) else None
            row.update(e=r.e, z=r.z, soc=r.soc_after, stage_reward=r.stage_reward)
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "policy": self._policy,
            "initial_soc": self._initial_soc,
            "terminal_salvage": self._terminal_salvage,
            "cumulative_reward": self.cumulative_reward,
            "records": [
                {**r._asdict(), "d": list(r.d)} for r in self._records
            ],
        }

    def __len__(self) -> int:
        return len(self._records)

    def __repr__(self) -> str:
        return (f"Trajectory(policy={self._policy!r}, horizon={self.horizon}, "
                f"cumulative_reward={self.cumulative_reward:.6f})")


# (t, fleet, tariff, state, clipped limits, g) -> Decision
StageRule = Callable[[int, DeviceFleet, TariffInterval, BatteryState, Limits, float], Decision]


def stage_reward(tariff: TariffInterval, fleet: DeviceFleet, decision: Decision, g: float,
                 degradation_cost_rate: float = 0.0) -> float:
    """Stage surplus minus an optional throughput cost c ([e]⁺ + [e]⁻)"""
    reward = surplus(tariff, fleet, decision.d, decision.e, g)
    if degradation_cost_rate > 0:
        reward -= degradation_cost_rate * (positive_part(decision.e) + negative_part(decision.e))
    return reward


def _validate_path(schedule: TariffSchedule, spec: BatterySpec, s0: float,
                   g_path: Sequence[float]) -> List[float]:
    if schedule.horizon == 0:
        raise DomainError("empty tariff schedule")
    if len(g_path) != schedule.horizon:
        raise DomainError(
            f"renewable path has {len(g_path)} entries, horizon is {schedule.horizon}")
    s0 = require_finite(s0, "s0")
    if not spec.min_soc <= s0 <= spec.capacity:
        raise DomainError(f"initial SoC {s0} outside [{spec.min_soc}, {spec.capacity}]")
    path = [require_finite(g, "g") for g in g_path]
    for t, g in enumerate(path):
        if g < 0:
            raise DomainError(f"renewable g[{t}]={g} is negative")
    return path


def simulate(schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec, s0: float,
             g_path: Sequence[float], rule: StageRule, policy: str = "",
             billed_g: Optional[Sequence[float]] = None) -> Trajectory:
    """
    Roll a causal stage rule forward: clip limits, decide, step SoC, book reward.

    Args:
        billed_g: renewable seen by the meter if it differs from g_path
            (a consumer without generation is billed on g = 0)
    """
    path = _validate_path(schedule, spec, s0, g_path)
    billed = path if billed_g is None else [float(g) for g in billed_g]
    per_t = fleet_schedule(fleets, schedule.horizon)

    state = BatteryState(s0)
    records = []
    for t, (tariff, fleet, g) in enumerate(zip(schedule, per_t, billed)):
        limits = clip_limits(spec, state)
        decision = rule(t, fleet, tariff, state, limits, g)
        next_state = step_soc(spec, state, decision.e)
        records.append(StageRecord(
            t=t,
            g=g,
            d=tuple(decision.d),
            e=decision.e,
            z=decision.z,
            soc_before=state.soc,
            soc_after=next_state.soc,
            payment=payment(tariff, decision.z),
            stage_reward=stage_reward(tariff, fleet, decision, g, spec.degradation_cost_rate),
            branch=decision.branch,
        ))
        state = next_state

    terminal = spec.salvage_rate * (state.soc - s0)
    return Trajectory(records, terminal, policy, s0)


def mco_rule(spec: BatterySpec, case: A1Case) -> StageRule:
    """Stage rule of the myopic co-optimizer for a schedule-wide A1 case"""
    def rule(t, fleet, tariff, state, limits, g):
        if case is A1Case.OK:
            return decide(fleet, tariff, spec, limits, g)
        return decide_relaxed_a1(fleet, tariff, spec, limits, g, case)
    return rule


@log_operation(logging.DEBUG, horizon="g_path")
def run_mco(schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec, s0: float,
            g_path: Sequence[float]) -> Trajectory:
    """Myopic co-optimization; each decision uses only g_t and s_t"""
    report = check_a1(spec, schedule)
    if not report.ok:
        logger.info("A1 fails, using relaxed policy", extra={"case": report.case.value})
    trajectory = simulate(schedule, fleets, spec, s0, g_path, mco_rule(spec, report.case), "mco")
    logger.debug("MCO branches", extra={"branches": [r.branch for r in trajectory.records]})
    return trajectory
