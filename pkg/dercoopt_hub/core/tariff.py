"""
NEM X billing: payment, prosumer surplus and tariff validity checks.

Sign convention: positive net consumption z is an import, positive payment
means the prosumer pays. Energy in kWh, rates in currency/kWh.
"""

from typing import TYPE_CHECKING, Any, Dict, Iterator, List, NamedTuple, Sequence, Tuple
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.utils import exact_sum, negative_part, positive_part, require_finite

if TYPE_CHECKING:
    from dercoopt_hub.core.demand import DeviceFleet


class TariffInterval:
    """NEM X parameters (retail, export, fixed) for one billing interval"""

    def __init__(self, retail_rate: float, export_rate: float,
                 fixed_charge: float = 0.0, avoided_cost_rate: float = 0.0):
        self._retail_rate = self._validate_rate(retail_rate, "retail_rate")
        self._export_rate = self._validate_rate(export_rate, "export_rate")
        self._fixed_charge = self._validate_rate(fixed_charge, "fixed_charge")
        self._avoided_cost_rate = self._validate_rate(avoided_cost_rate, "avoided_cost_rate")

    @staticmethod
    def _validate_rate(value: float, name: str) -> float:
        value = require_finite(value, name)
        if value < 0:
            raise DomainError(f"{name} cannot be negative, got {value}")
        return value

    @property
    def retail_rate(self) -> float:
        return self._retail_rate

    @property
    def export_rate(self) -> float:
        return self._export_rate

    @property
    def fixed_charge(self) -> float:
        return self._fixed_charge

    @property
    def avoided_cost_rate(self) -> float:
        return self._avoided_cost_rate

    def to_dict(self) -> Dict[str, float]:
        return {
            "retail_rate": self._retail_rate,
            "export_rate": self._export_rate,
            "fixed_charge": self._fixed_charge,
            "avoided_cost_rate": self._avoided_cost_rate,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TariffInterval":
        return cls(
            data["retail_rate"],
            data["export_rate"],
            data.get("fixed_charge", 0.0),
            data.get("avoided_cost_rate", 0.0),
        )

    def __repr__(self) -> str:
        return (f"TariffInterval(retail_rate={self._retail_rate}, export_rate={self._export_rate}, "
                f"fixed_charge={self._fixed_charge})")


class TariffSchedule:
    """Ordered per-interval tariffs over the scheduling horizon"""

    def __init__(self, intervals: Sequence[TariffInterval]):
        self._intervals: Tuple[TariffInterval, ...] = tuple(intervals)

    @property
    def intervals(self) -> Tuple[TariffInterval, ...]:
        return self._intervals

    @property
    def horizon(self) -> int:
        return len(self._intervals)

    def max_export_rate(self) -> float:
        if not self._intervals:
            raise DomainError("empty tariff schedule")
        return max(i.export_rate for i in self._intervals)

    def min_retail_rate(self) -> float:
        if not self._intervals:
            raise DomainError("empty tariff schedule")
        return min(i.retail_rate for i in self._intervals)

    def __len__(self) -> int:
        return len(self._intervals)

    def __getitem__(self, t: int) -> TariffInterval:
        return self._intervals[t]

    def __iter__(self) -> Iterator[TariffInterval]:
        return iter(self._intervals)

    def to_list(self) -> List[Dict[str, float]]:
        return [i.to_dict() for i in self._intervals]

    @classmethod
    def from_list(cls, data: Sequence[Dict[str, Any]]) -> "TariffSchedule":
        return cls([TariffInterval.from_dict(item) for item in data])


class ArbitrageReport(NamedTuple):
    ok: bool
    max_export_rate: float
    min_retail_rate: float
    # (export interval, retail interval) with export_rate >= retail_rate
    violations: List[Tuple[int, int]]


def payment(tariff: TariffInterval, z: float) -> float:
    """pi+ [z]+ - pi- [z]- + pi0"""
    z = require_finite(z, "z")
    return (tariff.retail_rate * positive_part(z)
            - tariff.export_rate * negative_part(z)
            + tariff.fixed_charge)


def surplus(tariff: TariffInterval, fleet: "DeviceFleet", d: Sequence[float],
            e: float, g: float) -> float:
    """Prosumer surplus U(d) - payment(1'd + e - g)"""
    from dercoopt_hub.core.demand import utility_value

    z = exact_sum([*d, e, -g])
    return utility_value(fleet, d) - payment(tariff, z)


def validate_no_arbitrage(schedule: TariffSchedule) -> ArbitrageReport:
    """Check max export rate < min retail rate over the whole schedule"""
    if len(schedule) == 0:
        raise DomainError("empty tariff schedule")

    violations = []
    for i, export_interval in enumerate(schedule):
        for j, retail_interval in enumerate(schedule):
            if export_interval.export_rate >= retail_interval.retail_rate:
                violations.append((i, j))

    return ArbitrageReport(
        ok=not violations,
        max_export_rate=schedule.max_export_rate(),
        min_retail_rate=schedule.min_retail_rate(),
        violations=violations,
    )
