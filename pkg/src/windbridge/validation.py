"""Real-versus-simulated comparisons: relative L2 errors of per-class bridge
means/covariances, MAPE of penalty moments, and the empirical battery
recursion that turns an observed power pair into penalty paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .segmentation import RenewalPoint, Segment, backward_times, step_states
from .simulate import BatterySpec, ChargeModel, PenaltySpec, discounted_penalty

__all__ = [
    "rel_l2_error",
    "mape",
    "mape_detail",
    "GroupComparison",
    "ComparisonReport",
    "compare_segments",
    "empirical_penalty",
    "daily_penalty_moments",
    "day_start_conditions",
]


def rel_l2_error(real, sim) -> float:
    """``100 * ||real - sim|| / ||real||`` (Frobenius norm for matrices)."""
    real = np.asarray(real, dtype=float)
    sim = np.asarray(sim, dtype=float)
    if real.shape != sim.shape:
        raise InputError(f"shape mismatch: {real.shape} vs {sim.shape}")
    base = float(np.linalg.norm(real))
    if base == 0.0:
        raise InputError("relative error undefined for an all-zero baseline")
    return 100.0 * float(np.linalg.norm(real - sim)) / base


def mape_detail(real, sim) -> tuple[float, int]:
    """Mean absolute percentage error, skipping zero baseline entries.

    Returns ``(value, n_skipped)``.
    """
    real = np.asarray(real, dtype=float)
    sim = np.asarray(sim, dtype=float)
    if real.shape != sim.shape:
        raise InputError(f"shape mismatch: {real.shape} vs {sim.shape}")
    keep = real != 0.0
    skipped = int((~keep).sum())
    if not keep.any():
        raise InputError("MAPE undefined: every baseline entry is zero")
    value = 100.0 * float(np.mean(np.abs(real[keep] - sim[keep]) / np.abs(real[keep])))
    return value, skipped


def mape(real, sim) -> float:
    return mape_detail(real, sim)[0]


@dataclass
class GroupComparison:
    i: int
    j: int
    x: int
    n_real: int
    n_sim: int
    l2_mean_pct: float
    l2_cov_pct: float | None


@dataclass
class ComparisonReport:
    """Per-class L2 errors plus whatever penalty MAPEs the caller attaches."""

    groups: list[GroupComparison] = field(default_factory=list)
    eligibility: int = 30
    mape_first_moment_pct: float | None = None
    mape_second_moment_pct: float | None = None
    mape_skipped_zero_real: int = 0

    @property
    def mean_l2_average_pct(self) -> float | None:
        if not self.groups:
            return None
        return float(np.mean([g.l2_mean_pct for g in self.groups]))

    def to_dict(self) -> dict:
        return {
            "eligibility": self.eligibility,
            "groups": [
                {
                    "i": g.i, "j": g.j, "x": g.x,
                    "n_real": g.n_real, "n_sim": g.n_sim,
                    "l2_mean_pct": g.l2_mean_pct, "l2_cov_pct": g.l2_cov_pct,
                }
                for g in self.groups
            ],
            "mean_l2_average_pct": self.mean_l2_average_pct,
            "penalty": {
                "mape_first_moment_pct": self.mape_first_moment_pct,
                "mape_second_moment_pct": self.mape_second_moment_pct,
                "skipped_zero_real": self.mape_skipped_zero_real,
            },
        }

    def csv_rows(self) -> list[list]:
        rows = [["i", "j", "x", "n_real", "n_sim", "l2_mean_pct", "l2_cov_pct"]]
        for g in self.groups:
            rows.append([
                g.i, g.j, g.x, g.n_real, g.n_sim,
                repr(float(g.l2_mean_pct)),
                "" if g.l2_cov_pct is None else repr(float(g.l2_cov_pct)),
            ])
        return rows


def compare_segments(
    segments: list[Segment],
    charge_model: ChargeModel,
    rng: np.random.Generator | int | None = None,
    eligibility: int = 30,
    min_paths: int = 100,
    path_multiplier: int = 3,
) -> ComparisonReport:
    """Compare per-class sample means and covariances, real versus simulated.

    Only classes with at least ``eligibility`` complete observations are
    compared; each gets ``max(path_multiplier * n_real, min_paths)`` simulated
    paths.  Covariance entries use the n-1 convention on both sides; classes
    whose real covariance is identically zero report no covariance error.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    by_key: dict[tuple[int, int, int], list[Segment]] = {}
    for seg in segments:
        if seg.censored or seg.i == 0 or seg.j is None:
            continue
        by_key.setdefault((seg.i, seg.j, seg.x), []).append(seg)

    report = ComparisonReport(eligibility=eligibility)
    for key in sorted(by_key):
        group = by_key[key]
        n_real = len(group)
        if n_real < eligibility:
            continue
        i, j, x = key
        real = np.vstack([np.abs(s.charges) for s in group])
        n_sim = max(path_multiplier * n_real, min_paths)
        sim = np.empty((n_sim, x))
        for p in range(n_sim):
            sim[p] = charge_model.charge_path(i, j, x, rng)[1 : x + 1]
        l2_mean = rel_l2_error(real.mean(axis=0), sim.mean(axis=0))
        cov_real = np.atleast_2d(np.cov(real, rowvar=False, ddof=1))
        cov_sim = np.atleast_2d(np.cov(sim, rowvar=False, ddof=1))
        l2_cov = None
        if float(np.linalg.norm(cov_real)) > 0.0:
            l2_cov = rel_l2_error(cov_real, cov_sim)
        report.groups.append(
            GroupComparison(
                i=i, j=j, x=x, n_real=n_real, n_sim=n_sim,
                l2_mean_pct=l2_mean, l2_cov_pct=l2_cov,
            )
        )
    return report


def empirical_penalty(
    states: np.ndarray,
    charges: np.ndarray,
    battery: BatterySpec,
    fees: PenaltySpec,
    initial_soc: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run the battery recursion on observed per-step states and charges.

    Returns ``(soc, penalty)`` arrays aligned with the input steps; step 0
    keeps the initial state of charge and a zero penalty.
    """
    states = np.asarray(states, dtype=int)
    charges = np.asarray(charges, dtype=float)
    if states.shape != charges.shape:
        raise InputError("states and charges must be aligned")
    n = states.size
    soc = np.empty(n)
    pen = np.zeros(n)
    soc[0] = battery.soc_init if initial_soc is None else float(initial_soc)
    for k in range(1, n):
        c = charges[k]
        s_prev = soc[k - 1]
        if states[k] == 1:
            pen[k] = fees.up_fee * max(c - (battery.soc_max - s_prev), 0.0)
            soc[k] = min(s_prev + c, battery.soc_max)
        elif states[k] == -1:
            pen[k] = fees.down_fee * max(c - (s_prev - battery.soc_min), 0.0)
            soc[k] = max(s_prev - c, battery.soc_min)
        else:
            soc[k] = s_prev
    return soc, pen


def daily_penalty_moments(
    penalty: np.ndarray, horizon: int = 24, discount_rate: float = 0.0
) -> tuple[np.ndarray, np.ndarray, int]:
    """Fold a long penalty series into windows and average the discounted sums.

    Window ``d`` covers steps ``d*horizon + 1 .. (d+1)*horizon`` with
    window-relative discounting.  Returns per-step first and second moments of
    the cumulative discounted penalty plus the number of complete windows.
    """
    m = np.asarray(penalty, dtype=float)
    n_days = (m.size - 1) // horizon
    if n_days < 1:
        raise InputError(f"series too short for one {horizon}-step window")
    weights = np.exp(-discount_rate * np.arange(1, horizon + 1))
    w = np.empty((n_days, horizon))
    for d in range(n_days):
        block = m[d * horizon + 1 : (d + 1) * horizon + 1]
        w[d] = np.cumsum(block * weights)
    return w.mean(axis=0), (w**2).mean(axis=0), n_days


def day_start_conditions(
    points: list[RenewalPoint],
    soc: np.ndarray,
    n_steps: int,
    horizon: int = 24,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """States, backward times, and SOC observed at each window boundary."""
    z = step_states(points, n_steps)
    b = backward_times(points, n_steps)
    n_days = (n_steps - 1) // horizon
    starts = np.arange(n_days) * horizon
    return z[starts], b[starts], np.asarray(soc)[starts]
