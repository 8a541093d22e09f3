"""
Heuristic customer types sharing the billing and SoC machinery of the
co-optimizing prosumer.
"""

import logging
from typing import Callable, Collection, Dict, Optional, Sequence
from dercoopt_hub.core.demand import DeviceFleet, FleetSource, best_consumption, inverse_marginal
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.mco import StageRule, Trajectory, mco_rule, run_mco, simulate
from dercoopt_hub.core.policy import Decision, allocation_decision, decide_passive
from dercoopt_hub.core.storage import BatterySpec, check_a1
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule
from dercoopt_hub.core.utils import clamp, exact_sum
from dercoopt_hub.decorators import log_operation


def _retail_consumption(fleet: DeviceFleet, tariff: TariffInterval):
    d = tuple(inverse_marginal(dev, tariff.retail_rate) for dev in fleet)
    return d, exact_sum(d)


def _fixed_consumption(d, e: float, g: float, branch: str) -> Decision:
    return Decision(d, e, exact_sum([*d, e, -g]), branch)


def consumer_rule(spec: BatterySpec, peak_window: Collection[int]) -> StageRule:
    """No DER: consume f(π⁺), never touch the battery"""
    def rule(t, fleet, tariff, state, limits, g):
        d, _ = _retail_consumption(fleet, tariff)
        return _fixed_consumption(d, 0.0, g, "consumer")
    return rule


def solar_exporter_rule(spec: BatterySpec, peak_window: Collection[int]) -> StageRule:
    """Store renewables off-peak, cover consumption from storage on-peak and export g"""
    def rule(t, fleet, tariff, state, limits, g):
        d, consumption = _retail_consumption(fleet, tariff)
        if t in peak_window:
            e = -min(limits.discharge, consumption)
        else:
            e = min(g, limits.charge) if g > 0 else 0.0
        return _fixed_consumption(d, e, g, "solar_exporter")
    return rule


def self_powered_rule(spec: BatterySpec, peak_window: Collection[int]) -> StageRule:
    """Charge from g above consumption, discharge to cover the shortfall"""
    def rule(t, fleet, tariff, state, limits, g):
        d, consumption = _retail_consumption(fleet, tariff)
        e = clamp(g - consumption, -limits.discharge, limits.charge)
        return _fixed_consumption(d, e, g, "self_powered")
    return rule


def packaged_sdg_rule(spec: BatterySpec, peak_window: Collection[int],
                      active: StageRule) -> StageRule:
    """Charge first with min(g, ē′), then consume optimally on the rest; co-optimize when g = 0"""
    def rule(t, fleet, tariff, state, limits, g):
        if g > 0:
            e = min(g, limits.charge)
            return allocation_decision(best_consumption(fleet, tariff, g - e), e, g, "packaged_sdg")
        return active(t, fleet, tariff, state, limits, g)
    return rule


def passive_sdg_rule(spec: BatterySpec, peak_window: Collection[int]) -> StageRule:
    """Consumption fixed at f(π⁺), storage minimizes |z|"""
    def rule(t, fleet, tariff, state, limits, g):
        return decide_passive(fleet, tariff, spec, limits, g)
    return rule


# Customer type registry
_rule_registry: Dict[str, Callable[..., StageRule]] = {}


def register_customer_type(name: str, factory: Callable[..., StageRule]):
    """Register a stage-rule factory under a customer type name"""
    _rule_registry[name] = factory


def customer_types() -> Sequence[str]:
    return tuple(_rule_registry) + ("active_sdg",)


register_customer_type("consumer", consumer_rule)
register_customer_type("solar_exporter", solar_exporter_rule)
register_customer_type("self_powered", self_powered_rule)
register_customer_type("packaged_sdg", packaged_sdg_rule)
register_customer_type("passive_sdg", passive_sdg_rule)


@log_operation(logging.DEBUG, customer="kind", horizon="g_path")
def run_customer_type(kind: str, schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec,
                      s0: float, g_path: Sequence[float],
                      peak_window: Optional[Collection[int]] = None,
                      consumer_has_dg: bool = False) -> Trajectory:
    """
    Simulate one customer type on a renewable path.

    Args:
        peak_window: interval indices of the on-peak period (solar_exporter only)
        consumer_has_dg: bill the consumer on g instead of treating it as having no generation
    """
    if kind == "active_sdg":
        trajectory = run_mco(schedule, fleets, spec, s0, g_path)
        return Trajectory(trajectory.records, trajectory.terminal_salvage, kind, s0)
    if kind not in _rule_registry:
        raise DomainError(f"unknown customer type '{kind}', expected one of {customer_types()}")
    if kind == "solar_exporter" and peak_window is None:
        raise DomainError("solar_exporter needs a peak window")

    window = frozenset(peak_window or ())
    if kind == "packaged_sdg":
        rule = packaged_sdg_rule(spec, window, mco_rule(spec, check_a1(spec, schedule).case))
    else:
        rule = _rule_registry[kind](spec, window)

    billed = None
    if kind == "consumer" and not consumer_has_dg:
        billed = [0.0] * len(g_path)
    return simulate(schedule, fleets, spec, s0, g_path, rule, kind, billed_g=billed)
