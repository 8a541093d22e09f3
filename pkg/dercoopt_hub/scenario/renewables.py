"""
Renewable generation models for Monte Carlo runs: per-interval truncated
normals around a daily profile, or a finite-support Markov chain.
"""

from typing import Any, Dict, Optional, Sequence, Tuple
import numpy as np
from scipy.stats import norm
from dercoopt_hub.baselines.markov import MarkovRenewable
from dercoopt_hub.core.exceptions import DomainError

RENEWABLE_KINDS = ("profile", "markov")


class RenewableModel:
    """
    Renewable process description.

    kind "profile": g_t = max(0, N(μ_t·mean_scale, (σ_t·std_scale)²)) independently per interval.
    kind "markov": walks the given MarkovRenewable.
    """

    def __init__(self, kind: str = "profile", mean: Optional[Sequence[float]] = None,
                 std: Optional[Sequence[float]] = None, mean_scale: float = 1.0,
                 std_scale: float = 1.0, markov: Optional[MarkovRenewable] = None):
        if kind not in RENEWABLE_KINDS:
            raise DomainError(f"unknown renewable kind '{kind}', expected one of {RENEWABLE_KINDS}")
        self._kind = kind
        self._mean_scale = float(mean_scale)
        self._std_scale = float(std_scale)
        if self._mean_scale < 0 or self._std_scale < 0:
            raise DomainError("mean_scale and std_scale cannot be negative")

        if kind == "profile":
            if mean is None:
                raise DomainError("profile renewable needs a mean profile")
            self._mean = np.asarray(mean, dtype=float)
            self._std = np.zeros_like(self._mean) if std is None else np.asarray(std, dtype=float)
            if self._std.shape != self._mean.shape:
                raise DomainError("mean and std profiles must have the same length")
            if np.any(self._std < 0):
                raise DomainError("renewable std cannot be negative")
            if np.any(self._mean < 0):
                raise DomainError("renewable mean cannot be negative")
            self._markov = None
        else:
            if markov is None:
                raise DomainError("markov renewable needs a chain")
            self._markov = markov
            self._mean = None
            self._std = None

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def mean(self) -> Optional[np.ndarray]:
        return self._mean

    @property
    def std(self) -> Optional[np.ndarray]:
        return self._std

    @property
    def mean_scale(self) -> float:
        return self._mean_scale

    @property
    def std_scale(self) -> float:
        return self._std_scale

    @property
    def markov(self) -> Optional[MarkovRenewable]:
        return self._markov

    def scaled(self, mean_scale: float, std_scale: float) -> "RenewableModel":
        """Same profile with different scale factors (sweep axes)"""
        return RenewableModel(self._kind, self._mean, self._std, mean_scale, std_scale,
                             self._markov)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self._kind}
        if self._kind == "profile":
            data.update(mean=self._mean.tolist(), std=self._std.tolist(),
                        mean_scale=self._mean_scale, std_scale=self._std_scale)
        else:
            data["markov"] = self._markov.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RenewableModel":
        kind = data.get("kind", "profile")
        markov = None
        if kind == "markov" and "markov" in data:
            markov = MarkovRenewable.from_dict(data["markov"])
        return cls(kind, data.get("mean"), data.get("std"), data.get("mean_scale", 1.0),
                   data.get("std_scale", 1.0), markov)


def default_solar_profile(horizon: int, peak: float,
                          cv: float = 0.3) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bell-shaped daily solar profile over `horizon` equal intervals: zero before
    06:00 and after 18:00, sine-shaped in between with maximum `peak` at noon.

    Returns:
        (mean, std) with std = cv * mean
    """
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    if peak < 0 or cv < 0:
        raise DomainError("peak and cv cannot be negative")
    hours = (np.arange(horizon) + 0.5) * 24.0 / horizon
    mean = np.where((hours > 6.0) & (hours < 18.0),
                    peak * np.sin(np.pi * (hours - 6.0) / 12.0), 0.0)
    mean = np.maximum(mean, 0.0)
    return mean, cv * mean


def sample_paths(model: RenewableModel, horizon: int, n_paths: int, seed: int) -> np.ndarray:
    """
    Draw renewable paths, shape (n_paths, horizon). Path i is generated from
    its own RNG stream seeded with (seed, i), so results do not depend on how
    paths are split across workers.
    """
    if horizon < 1 or n_paths < 1:
        raise DomainError("horizon and path count must be at least 1")
    if model.kind == "markov":
        return model.markov.sample_paths(horizon, n_paths, seed)

    if model.mean.size < horizon:
        raise DomainError(f"mean profile has {model.mean.size} intervals, horizon is {horizon}")
    loc = model.mean[:horizon] * model.mean_scale
    scale = model.std[:horizon] * model.std_scale
    paths = np.empty((n_paths, horizon))
    for i in range(n_paths):
        rng = np.random.default_rng([seed, i])
        paths[i] = np.maximum(rng.normal(loc, scale), 0.0)
    return paths


def quantize_to_markov(model: RenewableModel, horizon: int, levels: int) -> MarkovRenewable:
    """
    Discretize independent truncated normals onto a common support of
    `levels` points on [0, max(μ + 3σ)]. Level 0 collects the truncated mass.
    """
    if model.kind == "markov":
        return model.markov
    if levels < 2:
        raise DomainError("need at least 2 levels")
    loc = model.mean[:horizon] * model.mean_scale
    scale = model.std[:horizon] * model.std_scale
    top = float(np.max(loc + 3.0 * scale))
    if top <= 0:
        return MarkovRenewable([0.0], np.ones((1, 1)), [1.0])

    support = np.linspace(0.0, top, levels)
    edges = np.concatenate([[-np.inf], 0.5 * (support[1:] + support[:-1]), [np.inf]])
    probs = np.empty((horizon, levels))
    for t in range(horizon):
        if scale[t] > 0:
            cdf = norm.cdf(edges, loc=loc[t], scale=scale[t])
            probs[t] = np.diff(cdf)
        else:
            probs[t] = 0.0
            probs[t, int(np.abs(support - loc[t]).argmin())] = 1.0
        probs[t] /= probs[t].sum()

    # independent intervals: every row of step t is the law of g_{t+1}
    steps = max(horizon - 1, 1)
    transition = np.empty((steps, levels, levels))
    for t in range(steps):
        transition[t] = probs[min(t + 1, horizon - 1)][np.newaxis, :]
    return MarkovRenewable(support, transition, probs[0])
