"""
Battery storage: SoC dynamics with asymmetric efficiencies, SoC-aware clipping
of the charge/discharge limits, and checks of the salvage-value (A1) and
non-binding SoC (A2) conditions.

Control sign convention: e > 0 charges, e < 0 discharges (meter side, kWh
per interval).
"""

from enum import Enum
from typing import Any, Dict, NamedTuple
from dercoopt_hub.core.exceptions import DomainError, StateError
from dercoopt_hub.core.tariff import TariffSchedule
from dercoopt_hub.core.utils import negative_part, positive_part, require_finite
from dercoopt_hub.infra.settings import settings


class BatterySpec:
    """Static battery parameters"""

    def __init__(self, capacity: float, charge_limit: float, discharge_limit: float,
                 charge_eff: float = 1.0, discharge_eff: float = 1.0, salvage_rate: float = 0.0,
                 min_soc: float = 0.0, degradation_cost_rate: float = 0.0):
        self._capacity = require_finite(capacity, "capacity")
        if self._capacity <= 0:
            raise DomainError(f"capacity must be positive, got {capacity}")
        self._charge_limit = self._validate_nonnegative(charge_limit, "charge_limit")
        self._discharge_limit = self._validate_nonnegative(discharge_limit, "discharge_limit")
        self._charge_eff = self._validate_efficiency(charge_eff, "charge_eff")
        self._discharge_eff = self._validate_efficiency(discharge_eff, "discharge_eff")
        self._salvage_rate = self._validate_nonnegative(salvage_rate, "salvage_rate")
        self._min_soc = self._validate_nonnegative(min_soc, "min_soc")
        if self._min_soc >= self._capacity:
            raise DomainError(f"min_soc {min_soc} must be below capacity {capacity}")
        self._degradation_cost_rate = self._validate_nonnegative(
            degradation_cost_rate, "degradation_cost_rate")

    @staticmethod
    def _validate_nonnegative(value: float, name: str) -> float:
        value = require_finite(value, name)
        if value < 0:
            raise DomainError(f"{name} cannot be negative, got {value}")
        return value

    @staticmethod
    def _validate_efficiency(value: float, name: str) -> float:
        value = require_finite(value, name)
        if not 0 < value <= 1:
            raise DomainError(f"{name} must be in (0, 1], got {value}")
        return value

    @property
    def capacity(self) -> float:
        return self._capacity

    @property
    def charge_limit(self) -> float:
        return self._charge_limit

    @property
    def discharge_limit(self) -> float:
        return self._discharge_limit

    @property
    def charge_eff(self) -> float:
        return self._charge_eff

    @property
    def discharge_eff(self) -> float:
        return self._discharge_eff

    @property
    def salvage_rate(self) -> float:
        return self._salvage_rate

    @property
    def min_soc(self) -> float:
        return self._min_soc

    @property
    def degradation_cost_rate(self) -> float:
        return self._degradation_cost_rate

    @property
    def limits(self) -> "Limits":
        """Unclipped (charge, discharge) limits"""
        return Limits(self._charge_limit, self._discharge_limit)

    def with_limits(self, charge_limit: float, discharge_limit: float) -> "BatterySpec":
        """Copy with different charge/discharge limits (used by limit sweeps)"""
        data = self.to_dict()
        data.update(charge_limit=charge_limit, discharge_limit=discharge_limit)
        return BatterySpec.from_dict(data)

    def to_dict(self) -> Dict[str, float]:
        return {
            "capacity": self._capacity,
            "charge_limit": self._charge_limit,
            "discharge_limit": self._discharge_limit,
            "charge_eff": self._charge_eff,
            "discharge_eff": self._discharge_eff,
            "salvage_rate": self._salvage_rate,
            "min_soc": self._min_soc,
            "degradation_cost_rate": self._degradation_cost_rate,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BatterySpec":
        known = ("capacity", "charge_limit", "discharge_limit", "charge_eff",
                 "discharge_eff", "salvage_rate", "min_soc", "degradation_cost_rate")
        return cls(**{k: data[k] for k in known if k in data})

    def __repr__(self) -> str:
        return f"BatterySpec({', '.join(f'{k}={v}' for k, v in self.to_dict().items())})"


class BatteryState:
    """State of charge in kWh"""

    def __init__(self, soc: float):
        self._soc = require_finite(soc, "soc")
        if self._soc < 0:
            raise DomainError(f"soc cannot be negative, got {soc}")

    @property
    def soc(self) -> float:
        return self._soc

    def __repr__(self) -> str:
        return f"BatteryState(soc={self._soc})"


class Limits(NamedTuple):
    charge: float
    discharge: float


class A1Case(Enum):
    OK = "ok"
    CASE_1A = "1a"  # always discharge
    CASE_1B = "1b"  # always charge
    CASE_1C = "1c"  # idle
    CASE_2 = "2"    # never charge
    CASE_3 = "3"    # never discharge


class A1Report(NamedTuple):
    case: A1Case
    max_export_rate: float
    min_retail_rate: float
    charge_value: float     # tau * gamma
    discharge_cost: float   # gamma / rho

    @property
    def ok(self) -> bool:
        return self.case is A1Case.OK


def _soc_bounds(spec: BatterySpec):
    return spec.min_soc, spec.capacity


def step_soc(spec: BatterySpec, state: BatteryState, e: float) -> BatteryState:
    """s' = s + tau [e]+ - [e]- / rho"""
    e = require_finite(e, "e")
    eps = settings.get("soc_tol", 1e-9)
    if e > spec.charge_limit + eps or e < -spec.discharge_limit - eps:
        raise DomainError(f"control {e} outside [-{spec.discharge_limit}, {spec.charge_limit}]")

    soc = state.soc + spec.charge_eff * positive_part(e) - negative_part(e) / spec.discharge_eff
    lower, upper = _soc_bounds(spec)
    if soc < lower - eps or soc > upper + eps:
        raise StateError(soc, lower, upper)
    return BatteryState(min(max(soc, lower), upper))


def clip_limits(spec: BatterySpec, state: BatteryState) -> Limits:
    """SoC-feasible limits: min{e_bar, (B - s)/tau} and min{e_under, rho (s - B_min)}"""
    lower, upper = _soc_bounds(spec)
    charge = min(spec.charge_limit, (upper - state.soc) / spec.charge_eff)
    discharge = min(spec.discharge_limit, spec.discharge_eff * (state.soc - lower))
    return Limits(max(charge, 0.0), max(discharge, 0.0))


def check_a1(spec: BatterySpec, schedule: TariffSchedule) -> A1Report:
    """Classify max pi- <= tau gamma <= gamma / rho <= min pi+ and its failure cases"""
    max_export = schedule.max_export_rate()
    min_retail = schedule.min_retail_rate()
    charge_value = spec.charge_eff * spec.salvage_rate
    discharge_cost = spec.salvage_rate / spec.discharge_eff

    if max_export <= charge_value and discharge_cost <= min_retail:
        case = A1Case.OK
    elif discharge_cost < max_export:
        case = A1Case.CASE_1A
    elif charge_value > min_retail:
        case = A1Case.CASE_1B
    elif charge_value < max_export and discharge_cost > min_retail:
        case = A1Case.CASE_1C
    elif charge_value < max_export:
        case = A1Case.CASE_2
    else:
        case = A1Case.CASE_3

    return A1Report(case, max_export, min_retail, charge_value, discharge_cost)


def check_a2_sufficient(spec: BatterySpec, s0: float, horizon: int) -> bool:
    """B - B_min > 2 T tau e_bar and s0 in (B_min + T e_under / rho, B - T tau e_bar)"""
    if horizon < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    charge_room = horizon * spec.charge_eff * spec.charge_limit
    discharge_room = horizon * spec.discharge_limit / spec.discharge_eff
    lower, upper = _soc_bounds(spec)
    return (upper - lower > 2 * charge_room
            and lower + discharge_room < s0 < upper - charge_room)
