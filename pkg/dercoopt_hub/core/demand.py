"""
Flexible demand: devices with concave utilities, inverse marginal utilities
f_k, the aggregate f, and the water-filling allocator realizing f_k(f^-1(x)).
"""

from typing import TYPE_CHECKING, Any, Callable, Dict, List, NamedTuple, Sequence, Tuple, Union
from dercoopt_hub.core.exceptions import DomainError, NumericError
from dercoopt_hub.core.utilities import UtilityModel, build_utility_model
from dercoopt_hub.core.utils import clamp, exact_sum, require_finite
from dercoopt_hub.infra.settings import settings

if TYPE_CHECKING:
    from dercoopt_hub.core.tariff import TariffInterval


# Feasibility slack for externally supplied consumption vectors
FEASIBILITY_TOL = 1e-9


class Device:
    """A flexible load: utility model plus consumption cap"""

    def __init__(self, utility: UtilityModel, cap: float):
        cap = require_finite(cap, "cap")
        if cap < 0:
            raise DomainError(f"device cap cannot be negative, got {cap}")
        self._utility = utility
        self._cap = cap

    @property
    def utility(self) -> UtilityModel:
        return self._utility

    @property
    def cap(self) -> float:
        return self._cap

    def to_dict(self) -> Dict[str, Any]:
        data = self._utility.to_dict()
        data["cap"] = self._cap
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Device":
        params = dict(data)
        if "cap" not in params:
            raise DomainError("device entry needs a 'cap'")
        cap = params.pop("cap")
        return cls(build_utility_model(params), cap)

    def __repr__(self) -> str:
        return f"Device({self._utility!r}, cap={self._cap})"


class DeviceFleet:
    """Ordered collection of K devices for one interval"""

    def __init__(self, devices: Sequence[Device]):
        self._devices: Tuple[Device, ...] = tuple(devices)
        self._total_cap = exact_sum(dev.cap for dev in self._devices)

    @property
    def devices(self) -> Tuple[Device, ...]:
        return self._devices

    @property
    def size(self) -> int:
        return len(self._devices)

    @property
    def caps(self) -> List[float]:
        return [dev.cap for dev in self._devices]

    @property
    def total_cap(self) -> float:
        return self._total_cap

    def __len__(self) -> int:
        return len(self._devices)

    def __iter__(self):
        return iter(self._devices)

    def to_list(self) -> List[Dict[str, Any]]:
        return [dev.to_dict() for dev in self._devices]

    @classmethod
    def from_list(cls, data: Sequence[Dict[str, Any]]) -> "DeviceFleet":
        return cls([Device.from_dict(item) for item in data])


FleetSource = Union[DeviceFleet, Sequence[DeviceFleet]]


class Allocation(NamedTuple):
    d: Tuple[float, ...]
    # price at which every device's marginal utility is equalized
    shadow_price: float

    @property
    def total(self) -> float:
        return exact_sum(self.d)


def fleet_schedule(fleets: FleetSource, horizon: int) -> List[DeviceFleet]:
    """Broadcast a single fleet to the horizon or validate a per-interval list"""
    if isinstance(fleets, DeviceFleet):
        return [fleets] * horizon
    fleets = list(fleets)
    if len(fleets) != horizon:
        raise DomainError(f"fleet schedule has {len(fleets)} entries, horizon is {horizon}")
    return fleets


def inverse_marginal(device: Device, price: float) -> float:
    """f_k(price) = max{0, min{L^-1(price), cap}}"""
    price = require_finite(price, "price")
    return clamp(device.utility.inverse_marginal(price), 0.0, device.cap)


def aggregate_inverse_marginal(fleet: DeviceFleet, price: float) -> float:
    """f(price) = sum_k f_k(price)"""
    price = require_finite(price, "price")
    return exact_sum(clamp(dev.utility.inverse_marginal(price), 0.0, dev.cap) for dev in fleet)


def _bracket(fleet: DeviceFleet, total: float) -> Tuple[float, float]:
    """Prices lo < hi with f(lo) >= total >= f(hi)"""
    hi = max(max(dev.utility.marginal(0.0) for dev in fleet), 0.0) + 1.0
    lo = 0.0
    step = 1.0
    for _ in range(200):
        if aggregate_inverse_marginal(fleet, lo) >= total:
            break
        lo -= step
        step *= 2.0
    else:
        raise NumericError("could not bracket the shadow price", {"total": total})
    return lo, hi


def _bisect(predicate: Callable[[float], bool], lo: float, hi: float, max_iter: int) -> float:
    """Smallest price in [lo, hi] where a monotone predicate turns true"""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _rebalance(fleet: DeviceFleet, d: List[float], total: float) -> List[float]:
    """Push the bisection residual onto devices with room so that sum(d) == total"""
    residual = total - exact_sum(d)
    for _ in range(len(d) + 1):
        if residual == 0.0:
            break
        interior = [k for k, dev in enumerate(fleet) if 0.0 < d[k] < dev.cap]
        movable = interior or [
            k for k, dev in enumerate(fleet)
            if (residual > 0 and d[k] < dev.cap) or (residual < 0 and d[k] > 0.0)
        ]
        if not movable:
            break
        share = residual / len(movable)
        for k in movable:
            d[k] = clamp(d[k] + share, 0.0, fleet.devices[k].cap)
        residual = total - exact_sum(d)
    return d


def water_fill(fleet: DeviceFleet, total: float) -> Allocation:
    """Split total consumption so that marginal utilities equalize at a shadow price"""
    total = require_finite(total, "total")
    tol = settings.get("water_fill_tol", 1e-10)
    max_iter = settings.get("water_fill_max_iter", 200)

    if total < -tol or total > fleet.total_cap + tol:
        raise DomainError(f"total {total} outside [0, {fleet.total_cap}]")
    total = clamp(total, 0.0, fleet.total_cap)

    if fleet.size == 0:
        return Allocation((), 0.0)
    if total == 0.0:
        return Allocation(tuple(0.0 for _ in fleet),
                          max(dev.utility.marginal(0.0) for dev in fleet))
    if total == fleet.total_cap:
        lo, _ = _bracket(fleet, total)
        return Allocation(tuple(fleet.caps), lo)

    lo, hi = _bracket(fleet, total)
    # f is non-increasing: the two edges bound the (possibly flat) level set {f = total}
    left = _bisect(lambda p: aggregate_inverse_marginal(fleet, p) <= total, lo, hi, max_iter)
    right = _bisect(lambda p: aggregate_inverse_marginal(fleet, p) < total, lo, hi, max_iter)
    price = 0.5 * (left + right)

    d = _rebalance(fleet, [inverse_marginal(dev, price) for dev in fleet], total)
    residual = abs(exact_sum(d) - total)
    if residual > tol:
        raise NumericError("water-filling did not reach the requested total",
                           {"total": total, "residual": residual, "price": price})
    return Allocation(tuple(d), price)


def utility_value(fleet: DeviceFleet, d: Sequence[float]) -> float:
    """U(d) = sum_k U_k(d_k) for a feasible consumption vector"""
    if len(d) != fleet.size:
        raise DomainError(f"consumption vector has {len(d)} entries, fleet has {fleet.size}")
    for k, (dev, d_k) in enumerate(zip(fleet, d)):
        if not (-FEASIBILITY_TOL <= d_k <= dev.cap + FEASIBILITY_TOL):
            raise DomainError(f"d[{k}]={d_k} outside [0, {dev.cap}]")
    return exact_sum(dev.utility.value(clamp(d_k, 0.0, dev.cap)) for dev, d_k in zip(fleet, d))


def best_consumption(fleet: DeviceFleet, tariff: "TariffInterval", x: float) -> Allocation:
    """
    Optimal consumption without storage for an effective renewable x (any real):
    f_k(pi+) below f(pi+), f_k(pi-) above f(pi-), water-filling on x in between
    """
    x = require_finite(x, "x")
    lower = aggregate_inverse_marginal(fleet, tariff.retail_rate)
    upper = aggregate_inverse_marginal(fleet, tariff.export_rate)
    if x <= lower:
        return Allocation(tuple(inverse_marginal(dev, tariff.retail_rate) for dev in fleet),
                          tariff.retail_rate)
    if x >= upper:
        return Allocation(tuple(inverse_marginal(dev, tariff.export_rate) for dev in fleet),
                          tariff.export_rate)
    return water_fill(fleet, x)
