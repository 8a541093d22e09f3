"""
Finite-support Markov model of behind-the-meter renewable generation
"""

from typing import Any, Dict, List, Optional, Sequence
import numpy as np
from dercoopt_hub.core.exceptions import DomainError


# Row-sum tolerance of transition matrices
STOCHASTIC_TOL = 1e-12


class MarkovRenewable:
    """
    Markov chain over ordered g-levels (kWh).

    `transition` is either one stationary (n, n) matrix or a stack of
    per-interval matrices (m, n, n) where entry t maps g_t to g_{t+1}.
    """

    def __init__(self, support: Sequence[float], transition: Any,
                 initial: Optional[Sequence[float]] = None):
        self._support = np.asarray(support, dtype=float)
        if self._support.ndim != 1 or self._support.size == 0:
            raise DomainError("renewable support must be a non-empty list of levels")
        if np.any(self._support < 0) or not np.all(np.isfinite(self._support)):
            raise DomainError("renewable levels must be finite and non-negative")
        if np.any(np.diff(self._support) <= 0):
            raise DomainError("renewable levels must be strictly increasing")

        n = self._support.size
        self._transition = np.asarray(transition, dtype=float)
        if self._transition.ndim == 2:
            self._transition = self._transition[np.newaxis]
            self._stationary = True
        else:
            self._stationary = False
        if self._transition.ndim != 3 or self._transition.shape[1:] != (n, n):
            raise DomainError(f"transition must be ({n}, {n}) or (T, {n}, {n}), "
                              f"got {np.shape(transition)}")
        self._check_stochastic(self._transition, "transition rows")

        if initial is None:
            self._initial = np.full(n, 1.0 / n)
        else:
            self._initial = np.asarray(initial, dtype=float)
            if self._initial.shape != (n,):
                raise DomainError(f"initial distribution must have {n} entries")
            self._check_stochastic(self._initial, "initial distribution")

    @staticmethod
    def _check_stochastic(probs: np.ndarray, what: str):
        if np.any(probs < 0):
            raise DomainError(f"{what} contain negative probabilities")
        if np.any(np.abs(probs.sum(axis=-1) - 1.0) > STOCHASTIC_TOL):
            raise DomainError(f"{what} must sum to 1")

    @property
    def support(self) -> np.ndarray:
        return self._support

    @property
    def levels(self) -> int:
        return self._support.size

    @property
    def initial(self) -> np.ndarray:
        return self._initial

    @property
    def stationary(self) -> bool:
        return self._stationary

    def transition_at(self, t: int) -> np.ndarray:
        """Matrix of P(g_{t+1} = j | g_t = i)"""
        if self._stationary:
            return self._transition[0]
        if not 0 <= t < self._transition.shape[0]:
            raise DomainError(f"no transition defined for interval {t}")
        return self._transition[t]

    def covers(self, horizon: int) -> bool:
        """True if transitions exist for every step of a horizon"""
        return self._stationary or self._transition.shape[0] >= horizon - 1

    def nearest_index(self, g: float) -> int:
        """Index of the support level closest to g"""
        return int(np.abs(self._support - g).argmin())

    def forecast(self, t: int, g_t: float, steps: int) -> List[float]:
        """Conditional means E[g_{t+j} | g_t] for j = 1..steps"""
        probs = np.zeros(self.levels)
        probs[self.nearest_index(g_t)] = 1.0
        means = []
        for j in range(steps):
            probs = probs @ self.transition_at(t + j)
            means.append(float(probs @ self._support))
        return means

    def sample_paths(self, horizon: int, n_paths: int, seed: int) -> np.ndarray:
        """Walk the chain; path i uses its own stream seeded by (seed, i)"""
        if horizon < 1 or n_paths < 1:
            raise DomainError("horizon and path count must be at least 1")
        if not self.covers(horizon):
            raise DomainError(f"transitions do not cover horizon {horizon}")
        paths = np.empty((n_paths, horizon))
        for i in range(n_paths):
            rng = np.random.default_rng([seed, i])
            state = rng.choice(self.levels, p=self._initial)
            paths[i, 0] = self._support[state]
            for t in range(1, horizon):
                state = rng.choice(self.levels, p=self.transition_at(t - 1)[state])
                paths[i, t] = self._support[state]
        return paths

    @classmethod
    def point_mass(cls, path: Sequence[float]) -> "MarkovRenewable":
        """Deterministic chain that follows a given path from any level"""
        path = np.asarray(path, dtype=float)
        support = np.unique(path)
        n = support.size
        index = {g: i for i, g in enumerate(support)}
        steps = max(path.size - 1, 1)
        transition = np.zeros((steps, n, n))
        for t in range(path.size - 1):
            transition[t, :, index[path[t + 1]]] = 1.0
        if path.size == 1:
            transition[0] = np.eye(n)
        initial = np.zeros(n)
        initial[index[path[0]]] = 1.0
        return cls(support, transition, initial)

    def to_dict(self) -> Dict[str, Any]:
        transition = self._transition[0] if self._stationary else self._transition
        return {
            "support": self._support.tolist(),
            "transition": transition.tolist(),
            "initial": self._initial.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MarkovRenewable":
        try:
            return cls(data["support"], data["transition"], data.get("initial"))
        except KeyError as e:
            raise DomainError(f"markov renewable is missing {e}")

    def __repr__(self) -> str:
        kind = "stationary" if self._stationary else f"{self._transition.shape[0]} steps"
        return f"MarkovRenewable(levels={self.levels}, {kind})"
