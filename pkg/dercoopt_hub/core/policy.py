"""
Closed-form co-optimization policy for one billing interval.

Renewable g is split into seven zones by the ordered thresholds
Δ⁺ ≤ σ⁺ ≤ σ⁺ᵒ ≤ σ⁻ᵒ ≤ σ⁻ ≤ Δ⁻. Below Δ⁺ the prosumer imports, above Δ⁻ it
exports, and in between it is off-grid (z = 0). Storage discharges while
g < σ⁺ᵒ, idles between σ⁺ᵒ and σ⁻ᵒ and charges above σ⁻ᵒ.

Consumption for a given effective renewable x is always realized by
water-filling, so flat stretches of the aggregate inverse marginal are
handled by the KKT allocation rather than by a functional inverse.
"""

from typing import NamedTuple, Optional, Sequence, Tuple, Union
from dercoopt_hub.core.demand import (
    Allocation,
    DeviceFleet,
    aggregate_inverse_marginal,
    best_consumption,
    inverse_marginal,
    water_fill,
)
from dercoopt_hub.core.exceptions import AssumptionViolationError, DomainError
from dercoopt_hub.core.storage import (
    A1Case,
    BatterySpec,
    Limits,
    check_a1,
)
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule, surplus
from dercoopt_hub.core.utils import clamp, exact_sum, negative_part, positive_part, require_finite
from dercoopt_hub.infra.settings import settings


class ThresholdSet(NamedTuple):
    delta_plus: float
    sigma_plus: float
    sigma_plus_o: float
    sigma_minus_o: float
    sigma_minus: float
    delta_minus: float


class Decision(NamedTuple):
    d: Tuple[float, ...]
    e: float
    z: float
    branch: str = ""

    @property
    def consumption(self) -> float:
        return exact_sum(self.d)


class NetZeroZone(NamedTuple):
    delta_plus: float
    delta_minus: float


class ZoneLengths(NamedTuple):
    net_consumption: float
    net_zero: float


# Zone labels in increasing order of g
BRANCHES = (
    "import",               # g < Δ⁺: consume f(π⁺), discharge fully
    "discharge_off_grid",   # Δ⁺ ≤ g < σ⁺: discharge fully, consume the rest
    "discharge_partial",    # σ⁺ ≤ g ≤ σ⁺ᵒ: consume f(γ/ρ)
    "idle",                 # σ⁺ᵒ < g < σ⁻ᵒ
    "charge_partial",       # σ⁻ᵒ ≤ g ≤ σ⁻: consume f(τγ)
    "charge_off_grid",      # σ⁻ < g ≤ Δ⁻: charge fully, consume the rest
    "export",               # g > Δ⁻
)

A1Tag = Union[A1Case, str]


def _net(d: Sequence[float], e: float, g: float) -> float:
    """z = 1'd + e - g, correctly rounded"""
    return exact_sum([*d, e, -g])


def _check_inputs(spec: BatterySpec, limits: Limits, g: float) -> float:
    g = require_finite(g, "g")
    if g < 0:
        raise DomainError(f"renewable g cannot be negative, got {g}")
    eps = settings.get("soc_tol", 1e-9)
    if limits.charge < 0 or limits.discharge < 0:
        raise DomainError(f"limits must be non-negative, got {tuple(limits)}")
    if limits.charge > spec.charge_limit + eps or limits.discharge > spec.discharge_limit + eps:
        raise DomainError(f"limits {tuple(limits)} exceed battery limits {tuple(spec.limits)}")
    return g


def _at_price(fleet: DeviceFleet, price: float) -> Tuple[float, ...]:
    return tuple(inverse_marginal(dev, price) for dev in fleet)


def threshold_values(fleet: DeviceFleet, tariff: TariffInterval,
                     spec: BatterySpec, limits: Limits) -> ThresholdSet:
    """Threshold formulas without the A1 check; relaxed cases 2 and 3 read their zones here"""
    discharge_price = spec.salvage_rate / spec.discharge_eff
    charge_price = spec.charge_eff * spec.salvage_rate
    f_retail = aggregate_inverse_marginal(fleet, tariff.retail_rate)
    f_discharge = aggregate_inverse_marginal(fleet, discharge_price)
    f_charge = aggregate_inverse_marginal(fleet, charge_price)
    f_export = aggregate_inverse_marginal(fleet, tariff.export_rate)
    return ThresholdSet(
        delta_plus=max(f_retail - limits.discharge, 0.0),
        sigma_plus=max(f_discharge - limits.discharge, 0.0),
        sigma_plus_o=f_discharge,
        sigma_minus_o=f_charge,
        sigma_minus=f_charge + limits.charge,
        delta_minus=f_export + limits.charge,
    )


def thresholds(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
               limits: Limits) -> ThresholdSet:
    """
    Ordered thresholds of the co-optimal policy for one interval.

    Pass the battery's raw limits for the unconstrained policy, or the
    SoC-clipped limits from clip_limits for the sequential algorithm.

    Raises:
        AssumptionViolationError: if π⁻ ≤ τγ ≤ γ/ρ ≤ π⁺ fails for this interval
    """
    if limits.charge < 0 or limits.discharge < 0:
        raise DomainError(f"limits must be non-negative, got {tuple(limits)}")
    report = check_a1(spec, TariffSchedule([tariff]))
    if not report.ok:
        raise AssumptionViolationError(
            report.case.value,
            f"π⁻={tariff.export_rate}, τγ={report.charge_value}, "
            f"γ/ρ={report.discharge_cost}, π⁺={tariff.retail_rate}")
    return threshold_values(fleet, tariff, spec, limits)


def branch_of(ts: ThresholdSet, g: float) -> str:
    """Zone label for g, closed on the left except the import and export ends"""
    if g < ts.delta_plus:
        return BRANCHES[0]
    if g < ts.sigma_plus:
        return BRANCHES[1]
    if g <= ts.sigma_plus_o:
        return BRANCHES[2]
    if g < ts.sigma_minus_o:
        return BRANCHES[3]
    if g <= ts.sigma_minus:
        return BRANCHES[4]
    if g <= ts.delta_minus:
        return BRANCHES[5]
    return BRANCHES[6]


def _storage_control(ts: ThresholdSet, limits: Limits, g: float) -> float:
    # piecewise linear in g with slopes in {0, 1}
    # never discharges more than consumption can absorb
    return (clamp(g - ts.sigma_plus_o, -limits.discharge, 0.0)
            + clamp(g - ts.sigma_minus_o, 0.0, limits.charge))


def decide(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
           limits: Limits, g: float) -> Decision:
    """Co-optimal consumption and storage decision for renewable g"""
    g = _check_inputs(spec, limits, g)
    ts = thresholds(fleet, tariff, spec, limits)
    branch = branch_of(ts, g)

    if g < ts.delta_plus:
        d = _at_price(fleet, tariff.retail_rate)
        e = -limits.discharge
    elif g > ts.delta_minus:
        d = _at_price(fleet, tariff.export_rate)
        e = limits.charge
    else:
        e = _storage_control(ts, limits, g)
        d = water_fill(fleet, g - e).d

    return Decision(d, e, _net(d, e, g), branch)


def no_storage_thresholds(fleet: DeviceFleet, tariff: TariffInterval) -> NetZeroZone:
    """Net-zero zone [f(π⁺), f(π⁻)] of a prosumer without storage"""
    return NetZeroZone(aggregate_inverse_marginal(fleet, tariff.retail_rate),
                       aggregate_inverse_marginal(fleet, tariff.export_rate))


def decide_no_storage(fleet: DeviceFleet, tariff: TariffInterval, g: float) -> Decision:
    g = require_finite(g, "g")
    if g < 0:
        raise DomainError(f"renewable g cannot be negative, got {g}")
    zone = no_storage_thresholds(fleet, tariff)
    branch = "import" if g < zone.delta_plus else ("export" if g > zone.delta_minus else "off_grid")
    d = best_consumption(fleet, tariff, g).d
    return Decision(d, 0.0, _net(d, 0.0, g), branch)


def passive_thresholds(fleet: DeviceFleet, tariff: TariffInterval, limits: Limits) -> NetZeroZone:
    """Net-zero zone [D - ẽ, D + ē] of a passive prosumer consuming D = f(π⁺)"""
    consumption = aggregate_inverse_marginal(fleet, tariff.retail_rate)
    return NetZeroZone(max(consumption - limits.discharge, 0.0), consumption + limits.charge)


def decide_passive(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
                   limits: Limits, g: float) -> Decision:
    """
    Passive prosumer: consumption fixed at f_k(π⁺) and the battery used only
    to bring net consumption as close to zero as its limits allow
    """
    g = _check_inputs(spec, limits, g)
    d = _at_price(fleet, tariff.retail_rate)
    consumption = exact_sum(d)
    if g <= consumption:
        e = max(g - consumption, -limits.discharge)
    else:
        e = min(g - consumption, limits.charge)
    z = _net(d, e, g)
    branch = "import" if z > 0 else ("export" if z < 0 else "off_grid")
    return Decision(d, e, z, branch)


def zone_lengths(delta_plus: float, delta_minus: float) -> ZoneLengths:
    """Lengths of the net-consumption [0, Δ⁺) and net-zero [Δ⁺, Δ⁻] zones"""
    if delta_plus < 0 or delta_minus < delta_plus:
        raise DomainError(
            f"thresholds must satisfy 0 <= Δ⁺ <= Δ⁻, got ({delta_plus}, {delta_minus})")
    return ZoneLengths(delta_plus, delta_minus - delta_plus)


def _parse_case(case: A1Tag) -> A1Case:
    if isinstance(case, A1Case):
        return case
    try:
        return A1Case(str(case))
    except ValueError:
        raise DomainError(f"unknown A1 case tag '{case}'")


def decide_relaxed_a1(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
                      limits: Limits, g: float, case: A1Tag,
                      schedule: Optional[TariffSchedule] = None) -> Decision:
    """
    Optimal decision when the salvage value is not sandwiched by the rates.

    Cases 1a/1b/1c fix the storage at full discharge, full charge or idle and
    pick consumption for the shifted renewable g - e. Case 2 never charges,
    case 3 never discharges.

    Args:
        case: tag returned by check_a1 for the whole schedule
        schedule: if given, the tag is re-checked against it
    """
    g = _check_inputs(spec, limits, g)
    case = _parse_case(case)
    if case is A1Case.OK:
        raise DomainError("A1 holds; use decide")
    if schedule is not None:
        actual = check_a1(spec, schedule).case
        if actual is not case:
            raise DomainError(
                f"case tag '{case.value}' does not match schedule case '{actual.value}'")

    branch = f"relaxed_{case.value}"
    ts = threshold_values(fleet, tariff, spec, limits)

    if case in (A1Case.CASE_1A, A1Case.CASE_1B, A1Case.CASE_1C):
        e = {A1Case.CASE_1A: -limits.discharge,
             A1Case.CASE_1B: limits.charge,
             A1Case.CASE_1C: 0.0}[case]
        d = best_consumption(fleet, tariff, g - e).d
    elif case is A1Case.CASE_2:
        if g < ts.delta_plus:
            d, e = _at_price(fleet, tariff.retail_rate), -limits.discharge
        else:
            e = clamp(g - ts.sigma_plus_o, -limits.discharge, 0.0)
            d = best_consumption(fleet, tariff, g - e).d
    else:
        if g > ts.delta_minus:
            d, e = _at_price(fleet, tariff.export_rate), limits.charge
        else:
            e = clamp(g - ts.sigma_minus_o, 0.0, limits.charge)
            d = best_consumption(fleet, tariff, g - e).d

    return Decision(d, e, _net(d, e, g), branch)


def stage_objective(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
                    decision: Decision, g: float) -> float:
    """Myopic objective U(d) - payment(z) + γ (τ[e]⁺ - [e]⁻/ρ)"""
    stored = (spec.charge_eff * positive_part(decision.e)
              - negative_part(decision.e) / spec.discharge_eff)
    return surplus(tariff, fleet, decision.d, decision.e, g) + spec.salvage_rate * stored


def allocation_decision(allocation: Allocation, e: float, g: float, branch: str = "") -> Decision:
    """Wrap a consumption allocation and storage control into a Decision"""
    return Decision(allocation.d, e, _net(allocation.d, e, g), branch)
