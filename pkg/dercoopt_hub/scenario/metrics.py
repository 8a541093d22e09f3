"""
Experiment metrics: optimality gaps, surplus gains over a reference customer,
net-consumption histograms, reverse power flow and utility net cost.
"""

from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence
import numpy as np
import pandas as pd
from dercoopt_hub.core.exceptions import DomainError, NumericError, UndefinedGapError
from dercoopt_hub.core.mco import Trajectory
from dercoopt_hub.core.utils import negative_part
from dercoopt_hub.infra.settings import settings


class GapReport(NamedTuple):
    algorithm: str
    gaps: List[float]   # percent, one per path
    mean: float
    std: float


class Histogram(NamedTuple):
    bin_start: List[float]
    bin_end: List[float]
    count: List[int]
    net_zero_mass: float
    total: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"bin_start": self.bin_start, "bin_end": self.bin_end,
                             "count": self.count})


class RpfReport(NamedTuple):
    records: pd.DataFrame        # path, t, export
    mean_by_interval: pd.DataFrame  # t, mean_export


class NetCostSeries(NamedTuple):
    psi: List[float]
    bill_savings: List[float]
    avoided_value: List[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": range(len(self.psi)), "bill_savings": self.bill_savings,
                             "avoided_value": self.avoided_value, "psi": self.psi})


def gap(policy_reward: float, bound: float, path_id: Optional[int] = None) -> float:
    """G = 100 (R - R♯) / R♯ in percent"""
    if bound == 0:
        raise UndefinedGapError(path_id)
    return 100.0 * (policy_reward - bound) / bound


def summarize_gaps(algorithm: str, gaps: Sequence[float]) -> GapReport:
    values = [float(v) for v in gaps]
    if not values:
        raise DomainError("no gaps to summarize")
    return GapReport(algorithm, values, float(np.mean(values)), float(np.std(values)))


def surplus_gain_table(rewards: Mapping[str, Sequence[float]],
                       reference: str = "consumer") -> Dict[str, float]:
    """
    Mean over paths of 100 (R_type - R_ref) / |R_ref| for each customer type.

    Args:
        rewards: cumulative reward per path for each type, all on the same paths
    """
    if reference not in rewards:
        raise DomainError(f"reference type '{reference}' is missing")
    ref = np.asarray(rewards[reference], dtype=float)
    if np.any(ref == 0):
        raise NumericError("reference surplus is zero", {"reference": reference})
    table = {}
    for kind, values in rewards.items():
        values = np.asarray(values, dtype=float)
        if values.shape != ref.shape:
            raise DomainError(f"'{kind}' has {values.size} paths, reference has {ref.size}")
        table[kind] = float(np.mean(100.0 * (values - ref) / np.abs(ref)))
    return table


def net_consumption_histogram(trajectories: Sequence[Trajectory], bin_width: float,
                              tol: Optional[float] = None) -> Histogram:
    """Counts of z per bin of width bin_width plus the mass at z = 0 (within tol)"""
    if bin_width <= 0:
        raise DomainError(f"bin width must be positive, got {bin_width}")
    tol = settings.get("net_zero_tol", 1e-9) if tol is None else tol
    z = np.array([r.z for traj in trajectories for r in traj.records], dtype=float)
    if z.size == 0:
        return Histogram([], [], [], 0.0, 0)

    # exact zeros (up to tol) go to the bin starting at 0
    z = np.where(np.abs(z) <= tol, 0.0, z)
    index = np.floor(z / bin_width).astype(np.int64)
    bins, counts = np.unique(index, return_counts=True)
    return Histogram(
        bin_start=[float(b * bin_width) for b in bins],
        bin_end=[float((b + 1) * bin_width) for b in bins],
        count=[int(c) for c in counts],
        net_zero_mass=float(np.mean(z == 0.0)),
        total=int(z.size),
    )


def rpf_records(trajectories: Sequence[Trajectory]) -> RpfReport:
    """Exported energy [z]⁻ per (path, t) and its mean per interval"""
    rows = [
        {"path": i, "t": r.t, "export": negative_part(r.z)}
        for i, traj in enumerate(trajectories)
        for r in traj.records
    ]
    records = pd.DataFrame(rows, columns=["path", "t", "export"])
    mean = (records.groupby("t", as_index=False)["export"].mean()
            .rename(columns={"export": "mean_export"}))
    return RpfReport(records, mean)


def utility_net_cost(with_der: Trajectory, baseline: Trajectory,
                     avoided_cost_rates: Sequence[float]) -> NetCostSeries:
    """Ψ_t = ΔP_t - π^AC_t g_t with ΔP_t the baseline minus DER payment"""
    if with_der.horizon != baseline.horizon or len(avoided_cost_rates) != with_der.horizon:
        raise DomainError("trajectories and avoided cost rates must share the horizon")
    savings = [b.payment - d.payment for b, d in zip(baseline.records, with_der.records)]
    avoided = [rate * r.g for rate, r in zip(avoided_cost_rates, with_der.records)]
    psi = [s - a for s, a in zip(savings, avoided)]
    return NetCostSeries(psi, savings, avoided)
