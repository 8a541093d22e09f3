"""
Discretized stochastic dynamic programming oracle.

Backward induction over an SoC grid and the support of a Markov renewable
model. The inner stage problem is solved over a grid of storage controls
with the optimal consumption for each control given by best_consumption,
so the (d, e) search collapses to a one-dimensional search over e.
"""

from typing import Dict, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from dercoopt_hub.baselines.markov import MarkovRenewable
from dercoopt_hub.core.demand import DeviceFleet, FleetSource, best_consumption, fleet_schedule
from dercoopt_hub.core.exceptions import DomainError, ResourceGuardError
from dercoopt_hub.core.mco import Trajectory, simulate, stage_reward
from dercoopt_hub.core.policy import Decision, allocation_decision
from dercoopt_hub.core.storage import BatterySpec, BatteryState, Limits, clip_limits
from dercoopt_hub.core.tariff import TariffInterval, TariffSchedule
from dercoopt_hub.decorators import log_operation
from dercoopt_hub.infra.settings import settings
from dercoopt_hub.logging_config import get_logger


logger = get_logger(__name__)

INNER_METHODS = ("grid", "bounded")

# Candidate controls closer than this are treated as the same point
ACTION_TOL = 1e-12


class DpSolution:
    """Value table V_t(s, g) on the SoC grid and renewable support"""

    def __init__(self, values: np.ndarray, continuation: np.ndarray, soc_grid: np.ndarray,
                 support: np.ndarray, initial: np.ndarray, soc_step: float, action_step: float,
                 inner: str = "grid",
                 reward_cache: Optional[Dict[Tuple[int, int], np.ndarray]] = None):
        self._values = values
        self._continuation = continuation
        self._soc_grid = soc_grid
        self._support = support
        self._initial = initial
        self._soc_step = soc_step
        self._action_step = action_step
        self._inner = inner
        self._reward_cache = reward_cache or {}

    @property
    def horizon(self) -> int:
        return self._values.shape[0] - 1

    @property
    def values(self) -> np.ndarray:
        """Array of shape (T + 1, n_soc, n_levels)"""
        return self._values

    @property
    def continuation(self) -> np.ndarray:
        """E[V_{t+1}(s, g_{t+1}) | g_t] of shape (T, n_soc, n_levels)"""
        return self._continuation

    @property
    def soc_grid(self) -> np.ndarray:
        return self._soc_grid

    @property
    def support(self) -> np.ndarray:
        return self._support

    @property
    def soc_step(self) -> float:
        return self._soc_step

    @property
    def action_step(self) -> float:
        return self._action_step

    @property
    def inner(self) -> str:
        return self._inner

    def level_index(self, g: float) -> int:
        return int(np.abs(self._support - g).argmin())

    def cached_rewards(self, t: int, j: int) -> Optional[np.ndarray]:
        return self._reward_cache.get((t, j))

    def value_at(self, soc: float, g: float, t: int = 0) -> float:
        """V_t(soc, g), linearly interpolated in SoC at the nearest support level"""
        if not 0 <= t <= self.horizon:
            raise DomainError(f"t={t} outside [0, {self.horizon}]")
        column = self._values[t, :, self.level_index(g)]
        return float(np.interp(soc, self._soc_grid, column))

    def expected_value(self, soc: float) -> float:
        """V_0(soc, ·) averaged over the initial renewable distribution"""
        return float(sum(p * self.value_at(soc, g) for p, g in zip(self._initial, self._support)))

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns t, soc, g, value"""
        horizon_1, n_soc, n_levels = self._values.shape
        t_idx, s_idx, g_idx = np.meshgrid(np.arange(horizon_1), np.arange(n_soc),
                                          np.arange(n_levels), indexing="ij")
        return pd.DataFrame({
            "t": t_idx.ravel(),
            "soc": self._soc_grid[s_idx.ravel()],
            "g": self._support[g_idx.ravel()],
            "value": self._values.ravel(),
        })


def _soc_points(spec: BatterySpec, soc_step: float) -> int:
    return max(int(round((spec.capacity - spec.min_soc) / soc_step)) + 1, 2)


def _soc_grid(spec: BatterySpec, soc_step: float) -> np.ndarray:
    return np.linspace(spec.min_soc, spec.capacity, _soc_points(spec, soc_step))


def _action_grid(spec: BatterySpec, action_step: float) -> np.ndarray:
    lowest = -int(np.floor(spec.discharge_limit / action_step + ACTION_TOL))
    highest = int(np.floor(spec.charge_limit / action_step + ACTION_TOL))
    return np.arange(lowest, highest + 1) * action_step


def _next_soc(spec: BatterySpec, soc: float, e: np.ndarray) -> np.ndarray:
    return soc + spec.charge_eff * np.maximum(e, 0.0) - np.maximum(-e, 0.0) / spec.discharge_eff


def _stage_decision(fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
                    g: float, e: float) -> Tuple[float, Decision]:
    """Best stage reward for a fixed storage control e"""
    decision = allocation_decision(best_consumption(fleet, tariff, g - e), e, g, "dp")
    return stage_reward(tariff, fleet, decision, g, spec.degradation_cost_rate), decision


class _StageSearch:
    """Maximizes r(e) + W(s'(e)) over SoC-feasible e at one (t, g)"""

    def __init__(self, fleet: DeviceFleet, tariff: TariffInterval, spec: BatterySpec,
                 g: float, actions: np.ndarray, rewards: np.ndarray, inner: str):
        self._fleet = fleet
        self._tariff = tariff
        self._spec = spec
        self._g = g
        self._actions = actions
        self._rewards = rewards
        self._inner = inner
        self._endpoint_cache: Dict[float, float] = {}

    def reward(self, e: float) -> float:
        if e not in self._endpoint_cache:
            self._endpoint_cache[e] = _stage_decision(self._fleet, self._tariff, self._spec,
                                                      self._g, e)[0]
        return self._endpoint_cache[e]

    def candidates(self, limits: Limits) -> Tuple[np.ndarray, np.ndarray]:
        mask = ((self._actions >= -limits.discharge - ACTION_TOL)
                & (self._actions <= limits.charge + ACTION_TOL))
        actions = list(self._actions[mask])
        rewards = list(self._rewards[mask])
        for end in (-limits.discharge, limits.charge):
            if not any(abs(a - end) <= ACTION_TOL for a in actions):
                actions.append(end)
                rewards.append(self.reward(end))
        order = np.argsort(actions)
        return np.asarray(actions)[order], np.asarray(rewards)[order]

    def best(self, soc: float, limits: Limits, future: np.ndarray,
             soc_grid: np.ndarray) -> Tuple[float, float]:
        """(value, e) of the best control from this SoC"""
        actions, rewards = self.candidates(limits)
        q = rewards + np.interp(_next_soc(self._spec, soc, actions), soc_grid, future)
        k = int(q.argmax())
        value, e = float(q[k]), float(actions[k])

        if self._inner == "bounded" and actions.size > 1:
            lo, hi = actions[max(k - 1, 0)], actions[min(k + 1, actions.size - 1)]

            def negative_q(x: float) -> float:
                nxt = _next_soc(self._spec, soc, np.array([x]))
                r = _stage_decision(self._fleet, self._tariff, self._spec, self._g, x)[0]
                return -(r + float(np.interp(nxt, soc_grid, future)[0]))

            result = minimize_scalar(negative_q, bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-9})
            if result.success and -result.fun > value:
                value, e = float(-result.fun), float(result.x)
        return value, e


def _check_size(horizon: int, n_soc: int, n_levels: int, soc_step: float):
    cap = int(settings.get("dp_state_cap", 50_000_000))
    size = (horizon + 1) * n_soc * n_levels
    if size > cap:
        raise ResourceGuardError(
            size, cap,
            f"Увеличьте шаг сетки SoC (сейчас {soc_step}) или сократите число уровней генерации "
            f"({n_levels}) либо горизонт ({horizon}).")


@log_operation(soc_step="soc_step", action_step="action_step")
def solve_dp(schedule: TariffSchedule, fleets: FleetSource, spec: BatterySpec, s0: float,
             renewable: MarkovRenewable, soc_step: float, action_step: float,
             inner: str = "grid") -> DpSolution:
    """
    Backward induction of V_t(s, g) = max_u { r_t(s, g, u) + E[V_{t+1}(s', g') | g] }
    with V_T(s, g) = γ (s - s0).

    Args:
        inner: "grid" searches the action grid plus the clipped limits;
            "bounded" refines the best grid point with a bounded scalar search

    Raises:
        ResourceGuardError: if the state table exceeds the configured cap
    """
    if soc_step <= 0 or action_step <= 0:
        raise DomainError("grid resolutions must be positive")
    if inner not in INNER_METHODS:
        raise DomainError(f"unknown inner method '{inner}', expected one of {INNER_METHODS}")
    horizon = schedule.horizon
    if horizon == 0:
        raise DomainError("empty tariff schedule")
    if not renewable.covers(horizon):
        raise DomainError(f"renewable transitions do not cover horizon {horizon}")
    if not spec.min_soc <= s0 <= spec.capacity:
        raise DomainError(f"initial SoC {s0} outside [{spec.min_soc}, {spec.capacity}]")

    per_t = fleet_schedule(fleets, horizon)
    support = renewable.support
    _check_size(horizon, _soc_points(spec, soc_step), support.size, soc_step)
    soc_grid = _soc_grid(spec, soc_step)
    n_soc, n_levels = soc_grid.size, support.size

    actions = _action_grid(spec, action_step)
    limits = [clip_limits(spec, BatteryState(s)) for s in soc_grid]

    values = np.empty((horizon + 1, n_soc, n_levels))
    values[horizon] = (spec.salvage_rate * (soc_grid - s0))[:, np.newaxis]
    continuation = np.empty((horizon, n_soc, n_levels))
    reward_cache: Dict[Tuple[int, int], np.ndarray] = {}

    for t in reversed(range(horizon)):
        tariff, fleet = schedule[t], per_t[t]
        if t == horizon - 1:
            # terminal value does not depend on g
            continuation[t] = values[horizon]
        else:
            continuation[t] = values[t + 1] @ renewable.transition_at(t).T

        for j, g in enumerate(support):
            rewards = np.array([_stage_decision(fleet, tariff, spec, float(g), float(e))[0]
                                for e in actions])
            reward_cache[(t, j)] = rewards
            search = _StageSearch(fleet, tariff, spec, float(g), actions, rewards, inner)
            future = continuation[t, :, j]
            for i, soc in enumerate(soc_grid):
                values[t, i, j] = search.best(float(soc), limits[i], future, soc_grid)[0]

        logger.debug("DP stage done", extra={"t": t})

    return DpSolution(values, continuation, soc_grid, support, renewable.initial,
                      soc_step, action_step, inner, reward_cache)


@log_operation(horizon="g_path")
def run_dp_policy(solution: DpSolution, schedule: TariffSchedule, fleets: FleetSource,
                  spec: BatterySpec, s0: float, g_path: Sequence[float]) -> Trajectory:
    """Causal policy of one-step lookahead against the stored continuation values"""
    if solution.horizon != schedule.horizon:
        raise DomainError(f"DP solution covers {solution.horizon} intervals, "
                          f"schedule has {schedule.horizon}")
    actions = _action_grid(spec, solution.action_step)

    def rule(t, fleet, tariff, state, limits, g):
        j = solution.level_index(g)
        rewards = solution.cached_rewards(t, j)
        if rewards is None or abs(solution.support[j] - g) > ACTION_TOL:
            rewards = np.array([_stage_decision(fleet, tariff, spec, g, float(e))[0]
                                for e in actions])
        search = _StageSearch(fleet, tariff, spec, g, actions, rewards, solution.inner)
        _, e = search.best(state.soc, limits, solution.continuation[t, :, j], solution.soc_grid)
        return _stage_decision(fleet, tariff, spec, g, e)[1]

    return simulate(schedule, fleets, spec, s0, g_path, rule, "dp")


def value_gradient(solution: DpSolution, soc: float, g: float, delta: float) -> float:
    """Forward difference (V_0(soc + delta, g) - V_0(soc, g)) / delta"""
    if delta <= 0:
        raise DomainError("delta must be positive")
    return (solution.value_at(soc + delta, g) - solution.value_at(soc, g)) / delta

