"""
Monte Carlo experiment runner: renewable paths -> policy trajectories and
perfect-foresight bounds, fanned out over a process pool.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
import numpy as np
from dercoopt_hub.baselines.customers import customer_types, run_customer_type
from dercoopt_hub.baselines.dp import DpSolution, run_dp_policy
from dercoopt_hub.baselines.foresight import perfect_foresight_bound
from dercoopt_hub.baselines.mpc import Forecaster, run_mpc
from dercoopt_hub.core.demand import DeviceFleet
from dercoopt_hub.core.exceptions import DomainError, NumericError
from dercoopt_hub.core.mco import Trajectory, run_mco
from dercoopt_hub.core.storage import BatterySpec
from dercoopt_hub.core.tariff import TariffSchedule
from dercoopt_hub.infra.settings import settings
from dercoopt_hub.logging_config import get_logger
from dercoopt_hub.scenario.metrics import GapReport, gap, summarize_gaps


logger = get_logger(__name__)

POLICIES = ("mco", "mpc", "dp") + tuple(customer_types())


class ExperimentInputs(NamedTuple):
    schedule: TariffSchedule
    fleets: List[DeviceFleet]
    spec: BatterySpec
    s0: float


class PolicyOptions(NamedTuple):
    window: int = 4
    forecast_ahead: bool = False
    forecaster: Optional[Forecaster] = None
    dp_solution: Optional[DpSolution] = None
    peak_window: Tuple[int, ...] = ()
    consumer_has_dg: bool = False


def resolve_limit_level(level: Union[str, float], capacity: float) -> float:
    """Charge/discharge limit in kWh; "C-8" and "C-4" mean capacity/8 and capacity/4"""
    if isinstance(level, str):
        marker = level.strip().upper()
        if marker.startswith("C-"):
            try:
                divisor = float(marker[2:])
            except ValueError:
                raise DomainError(f"bad limit marker '{level}'")
            if divisor <= 0:
                raise DomainError(f"bad limit marker '{level}'")
            return capacity / divisor
        try:
            return float(level)
        except ValueError:
            raise DomainError(f"bad limit level '{level}'")
    return float(level)


def run_policy_on_path(policy: str, inputs: ExperimentInputs, options: PolicyOptions,
                       g_path: Sequence[float]) -> Trajectory:
    """Simulate one policy on one renewable path"""
    schedule, fleets, spec, s0 = inputs
    if policy == "mco":
        return run_mco(schedule, fleets, spec, s0, g_path)
    if policy == "mpc":
        if options.forecaster is None:
            raise DomainError("MPC needs a forecaster")
        return run_mpc(schedule, fleets, spec, s0, options.forecaster, g_path,
                       options.window, options.forecast_ahead)
    if policy == "dp":
        if options.dp_solution is None:
            raise DomainError("DP policy needs a solved value table")
        return run_dp_policy(options.dp_solution, schedule, fleets, spec, s0, g_path)
    if policy in POLICIES:
        return run_customer_type(policy, schedule, fleets, spec, s0, g_path,
                                 peak_window=options.peak_window or None,
                                 consumer_has_dg=options.consumer_has_dg)
    raise DomainError(f"unknown policy '{policy}', expected one of {POLICIES}")


def _policy_task(task) -> Trajectory:
    policy, inputs, options, g_path = task
    return run_policy_on_path(policy, inputs, options, g_path)


def _bound_task(task) -> float:
    path_id, inputs, g_path = task
    schedule, fleets, spec, s0 = inputs
    try:
        return perfect_foresight_bound(schedule, fleets, spec, s0, g_path)
    except NumericError as e:
        raise NumericError(f"bound failed on path {path_id}", {**e.diagnostics, "path": path_id})


class ExperimentRunner:
    """Runs policies over a batch of paths; results always come back in path order"""

    def __init__(self, inputs: ExperimentInputs, jobs: Optional[int] = None):
        self.inputs = inputs
        self.jobs = max(int(jobs if jobs is not None else settings.get("jobs", 1)), 1)

    def _map(self, fn: Callable, tasks: list) -> list:
        if self.jobs == 1 or len(tasks) <= 1:
            return [fn(task) for task in tasks]
        with ProcessPoolExecutor(max_workers=min(self.jobs, len(tasks))) as pool:
            return list(pool.map(fn, tasks))

    def run_policy(self, policy: str, paths: np.ndarray,
                   options: Optional[PolicyOptions] = None) -> List[Trajectory]:
        if policy not in POLICIES:
            raise DomainError(f"unknown policy '{policy}', expected one of {POLICIES}")
        options = options or PolicyOptions()
        logger.info("Running policy", extra={"policy": policy, "paths": len(paths),
                                             "jobs": self.jobs})
        tasks = [(policy, self.inputs, options, [float(g) for g in path]) for path in paths]
        return self._map(_policy_task, tasks)

    def bounds(self, paths: np.ndarray) -> List[float]:
        tasks = [(i, self.inputs, [float(g) for g in path]) for i, path in enumerate(paths)]
        return self._map(_bound_task, tasks)

    def gap_reports(self, algorithms: Sequence[str], paths: np.ndarray,
                    options: Optional[PolicyOptions] = None
                    ) -> Tuple[List[float], Dict[str, List[Trajectory]], Dict[str, GapReport]]:
        """Bounds per path, trajectories and gap summaries per algorithm"""
        bounds = self.bounds(paths)
        trajectories = {}
        reports = {}
        for algorithm in algorithms:
            runs = self.run_policy(algorithm, paths, options)
            gaps = [gap(traj.cumulative_reward, bound, i)
                    for i, (traj, bound) in enumerate(zip(runs, bounds))]
            trajectories[algorithm] = runs
            reports[algorithm] = summarize_gaps(algorithm, gaps)
        return bounds, trajectories, reports
