"""
Perfect-foresight upper bound: the one-shot deterministic co-optimization
over a known renewable path, relaxed to allow simultaneous charging and
discharging so that it is a convex program.
"""

import logging
from typing import List, NamedTuple, Optional, Sequence
import cvxpy as cp
import numpy as np
from dercoopt_hub.core.demand import DeviceFleet, FleetSource, fleet_schedule
from dercoopt_hub.core.exceptions import DomainError, NumericError
from dercoopt_hub.core.storage import BatterySpec
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule
from dercoopt_hub.decorators import log_operation
from dercoopt_hub.infra.settings import settings
from dercoopt_hub.logging_config import get_logger


logger = get_logger(__name__)

SOLVER = "CLARABEL"


class ForesightSolution(NamedTuple):
    value: float
    d: List[np.ndarray]
    charge: np.ndarray      # e⁺ per interval
    discharge: np.ndarray   # e⁻ per interval
    soc: np.ndarray         # T + 1 entries
    status: str


def _consumption_block(fleet: DeviceFleet):
    """(variable, utility expression, total consumption, upper bounds) for a non-empty fleet"""
    d = cp.Variable(fleet.size, nonneg=True)
    upper = np.array([min(dev.cap, dev.utility.saturation) for dev in fleet])
    utility = cp.sum(cp.hstack([dev.utility.cvx_expression(d[k]) for k, dev in enumerate(fleet)]))
    return d, utility, cp.sum(d), upper


def solve_foresight(tariffs: Sequence[TariffInterval], fleets: Sequence[DeviceFleet],
                    spec: BatterySpec, s0: float, g: Sequence[float],
                    terminal_rate: Optional[float] = None) -> ForesightSolution:
    """
    Maximize Σ_t [U_t(d_t) - payment_t(z_t)] + γ (s_T - s_0) - c Σ_t (e⁺_t + e⁻_t)
    over consumption, relaxed charge/discharge and SoC.

    Args:
        terminal_rate: value per kWh of the final SoC change (defaults to salvage rate)
    """
    horizon = len(g)
    if horizon == 0 or len(tariffs) != horizon or len(fleets) != horizon:
        raise DomainError("tariffs, fleets and renewable path must share a non-empty horizon")
    for t, tariff in enumerate(tariffs):
        if tariff.export_rate > tariff.retail_rate:
            raise DomainError(f"export rate exceeds retail rate at interval {t}")
    gamma = spec.salvage_rate if terminal_rate is None else terminal_rate

    charge = cp.Variable(horizon, nonneg=True)
    discharge = cp.Variable(horizon, nonneg=True)
    soc = cp.Variable(horizon + 1)
    constraints = [
        soc[0] == s0,
        soc[1:] == soc[:-1] + spec.charge_eff * charge - discharge / spec.discharge_eff,
        soc >= spec.min_soc,
        soc <= spec.capacity,
        charge <= spec.charge_limit,
        discharge <= spec.discharge_limit,
    ]

    objective = gamma * (soc[horizon] - s0)
    if spec.degradation_cost_rate > 0:
        objective -= spec.degradation_cost_rate * cp.sum(charge + discharge)

    d_vars = []
    for t, (tariff, fleet) in enumerate(zip(tariffs, fleets)):
        consumption = 0.0
        if fleet.size:
            d, utility, consumption, upper = _consumption_block(fleet)
            constraints.append(d <= upper)
            objective += utility
        else:
            d = None
        d_vars.append(d)
        z = consumption + charge[t] - discharge[t] - g[t]
        spread = tariff.retail_rate - tariff.export_rate
        objective -= tariff.export_rate * z + spread * cp.pos(z) + tariff.fixed_charge

    problem = cp.Problem(cp.Maximize(objective), constraints)
    tol = settings.get("solver_tol", 1e-9)
    try:
        problem.solve(solver=SOLVER, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    except cp.error.SolverError as e:
        raise NumericError("convex solver failed", {"error": str(e), "horizon": horizon})

    if problem.status != cp.OPTIMAL:
        raise NumericError("convex solver did not reach optimality",
                           {"status": problem.status, "horizon": horizon})
    logger.debug("Foresight problem solved", extra={"horizon": horizon, "value": problem.value})

    return ForesightSolution(
        value=float(problem.value),
        d=[np.zeros(0) if d is None else np.asarray(d.value, dtype=float) for d in d_vars],
        charge=np.asarray(charge.value, dtype=float),
        discharge=np.asarray(discharge.value, dtype=float),
        soc=np.asarray(soc.value, dtype=float),
        status=problem.status,
    )


@log_operation(logging.DEBUG, horizon="g_path")
def perfect_foresight_bound(schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec,
                            s0: float, g_path: Sequence[float]) -> float:
    """Relaxed one-shot optimum given the whole renewable path"""
    if len(g_path) != schedule.horizon:
        raise DomainError(
            f"renewable path has {len(g_path)} entries, horizon is {schedule.horizon}")
    if not spec.min_soc <= s0 <= spec.capacity:
        raise DomainError(f"initial SoC {s0} outside [{spec.min_soc}, {spec.capacity}]")
    if any(g < 0 for g in g_path):
        raise DomainError("renewable path has negative entries")
    per_t = fleet_schedule(fleets, schedule.horizon)
    return solve_foresight(list(schedule), per_t, spec, s0, [float(g) for g in g_path]).value
