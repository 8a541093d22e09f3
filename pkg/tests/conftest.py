import pytest
from dercoopt_hub.core.demand import Device, DeviceFleet
from dercoopt_hub.core.storage import BatterySpec
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule
from dercoopt_hub.core.utilities import QuadraticUtility


def make_fleet(*params):
    """Fleet from (alpha, beta, cap) triples"""
    return DeviceFleet([Device(QuadraticUtility(a, b), cap) for a, b, cap in params])


def make_battery(capacity=4.0, limit=0.5, salvage_rate=0.2, **kwargs):
    return BatterySpec(capacity=capacity, charge_limit=limit, discharge_limit=limit,
                       salvage_rate=salvage_rate, **kwargs)


def make_schedule(horizon, retail_rate=0.4, export_rate=0.1, **kwargs):
    return TariffSchedule([TariffInterval(retail_rate, export_rate, **kwargs)] * horizon)


@pytest.fixture
def fleet():
    """Single quadratic device alpha=2, beta=1, cap=2"""
    return make_fleet((2.0, 1.0, 2.0))


@pytest.fixture
def tariff():
    return TariffInterval(0.4, 0.1)


@pytest.fixture
def battery():
    """B=4, limits 0.5, lossless, salvage 0.2"""
    return make_battery()
