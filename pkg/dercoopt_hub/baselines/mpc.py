"""
Model predictive control: at each interval solve the relaxed deterministic
problem over a short window (realized g_t plus forecasts), apply the first
decision with physical netting e = e⁺ - e⁻, then roll forward.
"""

import logging
from typing import List, Protocol, Sequence
from dercoopt_hub.baselines.foresight import solve_foresight
from dercoopt_hub.core.demand import FleetSource, fleet_schedule
from dercoopt_hub.core.exceptions import DomainError
from dercoopt_hub.core.mco import Trajectory, simulate
from dercoopt_hub.core.policy import Decision
from dercoopt_hub.core.storage import BatterySpec
from dercoopt_hub.core.tariff import TariffSchedule
from dercoopt_hub.core.utils import clamp, exact_sum
from dercoopt_hub.decorators import log_operation


class Forecaster(Protocol):
    def forecast(self, t: int, g_t: float, steps: int) -> List[float]:
        """Point forecasts of g_{t+1}..g_{t+steps} given the current g_t"""


class MeanProfileForecaster:
    """Forecast by the (scaled) historical mean profile, ignoring g_t"""

    def __init__(self, mean: Sequence[float], mean_scale: float = 1.0):
        self._mean = [float(m) * mean_scale for m in mean]

    def forecast(self, t: int, g_t: float, steps: int) -> List[float]:
        if t + steps >= len(self._mean):
            raise DomainError(f"mean profile has {len(self._mean)} intervals, "
                              f"forecast needs {t + steps + 1}")
        return self._mean[t + 1:t + 1 + steps]


class PathForecaster:
    """Exact forecasts from a known path (perfect information)"""

    def __init__(self, path: Sequence[float]):
        self._path = [float(g) for g in path]

    def forecast(self, t: int, g_t: float, steps: int) -> List[float]:
        return self._path[t + 1:t + 1 + steps]


@log_operation(logging.DEBUG, horizon="g_path", window="window")
def run_mpc(schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec, s0: float,
            forecaster: Forecaster, g_path: Sequence[float], window: int,
            forecast_ahead: bool = False) -> Trajectory:
    """
    Receding-horizon policy over windows of `window` intervals.

    Args:
        forecast_ahead: use the realized g_t plus `window` forecasts instead of
            `window - 1`
    """
    if window < 1:
        raise DomainError(f"MPC window must be at least 1, got {window}")
    horizon = schedule.horizon
    per_t = fleet_schedule(fleets, horizon)
    steps = window if forecast_ahead else window - 1

    def rule(t, fleet, tariff, state, limits, g):
        end = min(horizon, t + 1 + steps)
        predicted = forecaster.forecast(t, g, end - t - 1) if end - t > 1 else []
        window_g = [g] + [max(float(p), 0.0) for p in predicted]
        solution = solve_foresight(schedule[t:end], per_t[t:end], spec, state.soc, window_g)

        e = clamp(solution.charge[0] - solution.discharge[0], -limits.discharge, limits.charge)
        d = tuple(clamp(float(d_k), 0.0, dev.cap) for d_k, dev in zip(solution.d[0], fleet))
        return Decision(d, e, exact_sum([*d, e, -g]), "mpc")

    return simulate(schedule, fleets, spec, s0, g_path, rule, "mpc")
