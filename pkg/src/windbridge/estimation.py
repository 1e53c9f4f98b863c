"""Estimation and sampling of the per-segment parameter law.

Three pieces:

* the constrained support of ``(rho, tau, h)`` per segment class,
* a rank-based Gaussian-copula sampler with empirical-quantile marginals
  (bootstrap-augmented for thin classes), behind a small pluggable interface,
* the per-path volatility MLE and the per-(i, j) Box-Cox regression that
  predicts volatility from ``(rho, tau, h, x)`` and their pairwise products.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .bridge import SIGMA_FLOOR, ErrorPath
from .errors import EstimationError, InputError, InsufficientDataError

__all__ = [
    "SupportSpec",
    "nominal_param_support",
    "attainable_param_support",
    "ParamSampler",
    "EmpiricalCopulaSampler",
    "DegenerateSampler",
    "fit_joint_density",
    "sample_params",
    "sampler_from_dict",
    "mle_sigma",
    "SigmaModel",
    "fit_sigma_regression",
    "predict_sigma",
    "box_cox",
    "inv_box_cox",
    "MAX_REJECTIONS",
]

logger = logging.getLogger(__name__)

#: Rejection-sampling budget before the fitted density is declared inconsistent.
MAX_REJECTIONS = 10_000

REGRESSOR_NAMES = (
    "const",
    "rho",
    "tau",
    "h",
    "x",
    "rho*tau",
    "rho*h",
    "rho*x",
    "tau*h",
    "tau*x",
    "h*x",
)


# ---------------------------------------------------------------------------
# Parameter support
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportSpec:
    """Constraint region for ``(rho, tau, h)`` on one segment class.

    ``rho`` ranges over ``[rho_min, rho_max]``, ``tau`` over ``{1..x}``, and
    ``h`` over ``(0, h_max(rho, tau))`` with
    ``h_max = h_rho_coef * rho + h_offset - tau * limit``.
    """

    side: int
    x: int
    limit: float
    capacity: float
    rho_min: float
    rho_max: float
    h_rho_coef: float
    h_offset: float
    h_open: bool = True

    def __post_init__(self) -> None:
        if self.side not in (-1, 1):
            raise InputError(f"support side must be -1 or +1, got {self.side}")
        if self.x < 1:
            raise InputError(f"sojourn must be >= 1, got {self.x}")
        if self.rho_min > self.rho_max:
            raise InputError("empty rho range")

    def h_max(self, rho, tau):
        return self.h_rho_coef * np.asarray(rho, dtype=float) + self.h_offset - np.asarray(
            tau, dtype=float
        ) * self.limit

    def contains(self, rho, tau, h, require_integer_tau: bool = True) -> np.ndarray | bool:
        rho = np.asarray(rho, dtype=float)
        tau = np.asarray(tau, dtype=float)
        h = np.asarray(h, dtype=float)
        ok = (rho >= self.rho_min) & (rho <= self.rho_max)
        ok &= (tau >= 1.0) & (tau <= self.x)
        if require_integer_tau:
            ok &= tau == np.round(tau)
        hmax = self.h_max(rho, tau)
        ok &= (h > 0.0) & ((h < hmax) if self.h_open else (h <= hmax))
        if ok.ndim == 0:
            return bool(ok)
        return ok

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "x": self.x,
            "limit": self.limit,
            "capacity": self.capacity,
            "rho_min": self.rho_min,
            "rho_max": self.rho_max,
            "h_rho_coef": self.h_rho_coef,
            "h_offset": self.h_offset,
            "h_open": self.h_open,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SupportSpec":
        return cls(
            side=int(data["side"]),
            x=int(data["x"]),
            limit=float(data["limit"]),
            capacity=float(data["capacity"]),
            rho_min=float(data["rho_min"]),
            rho_max=float(data["rho_max"]),
            h_rho_coef=float(data["h_rho_coef"]),
            h_offset=float(data["h_offset"]),
            h_open=bool(data.get("h_open", True)),
        )


def nominal_param_support(side: int, x: int, limit: float, capacity: float) -> SupportSpec:
    """The tight design box for the parameter law.

    Charging side: ``rho in [0, (x+1)*limit]`` with ``h < rho - tau*limit``.
    Discharging side: ``rho in [capacity - (x+1)*limit, capacity]`` with
    ``h < capacity - rho - tau*limit``.
    """
    if side == 1:
        return SupportSpec(
            side=1, x=x, limit=limit, capacity=capacity,
            rho_min=0.0, rho_max=(x + 1) * limit,
            h_rho_coef=1.0, h_offset=0.0,
        )
    if side == -1:
        return SupportSpec(
            side=-1, x=x, limit=limit, capacity=capacity,
            rho_min=capacity - (x + 1) * limit, rho_max=capacity,
            h_rho_coef=-1.0, h_offset=capacity,
        )
    raise InputError("support is defined only for side -1 or +1")


def attainable_param_support(side: int, x: int, limit: float, capacity: float) -> SupportSpec:
    """Bounds actually attainable under the ramp correction.

    Derived from the initial-power formula and the per-step ramp geometry:
    every ``(rho, tau, h)`` computed from a corrected series lies inside.
    Charging side: ``rho in [max(capacity - (x+1)*limit, 0), capacity + limit]``
    and ``h <= rho - tau*limit``.  Discharging side:
    ``rho in [min((x+1)*limit, capacity), capacity]`` and
    ``h <= rho - (tau - 2)*limit`` (the entry power may exceed ``rho`` by one
    ramp step, which loosens the peak bound by two steps).  The ``h`` bounds
    are closed (attained exactly when the generated power sits at 0 or at
    rated capacity) and padded by 1e-12 MW against rounding in the power
    recursion.
    """
    pad = 1e-12
    if side == 1:
        return SupportSpec(
            side=1, x=x, limit=limit, capacity=capacity,
            rho_min=max(capacity - (x + 1) * limit, 0.0), rho_max=capacity + limit,
            h_rho_coef=1.0, h_offset=pad, h_open=False,
        )
    if side == -1:
        return SupportSpec(
            side=-1, x=x, limit=limit, capacity=capacity,
            rho_min=min((x + 1) * limit, capacity), rho_max=capacity,
            h_rho_coef=1.0, h_offset=2.0 * limit + pad, h_open=False,
        )
    raise InputError("support is defined only for side -1 or +1")


# ---------------------------------------------------------------------------
# Parameter samplers
# ---------------------------------------------------------------------------


def _nearest_tau(tau_cont, x: int) -> np.ndarray:
    """Nearest integer in {1..x}, ties rounded up."""
    return np.clip(np.floor(np.asarray(tau_cont, dtype=float) + 0.5), 1, x).astype(int)


class ParamSampler:
    """Interface for per-class ``(rho, tau, h)`` samplers."""

    support: SupportSpec

    def sample_n(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> tuple[float, int, float]:
        rho, tau, h = self.sample_n(1, rng)
        return float(rho[0]), int(tau[0]), float(h[0])

    def to_dict(self) -> dict:
        raise NotImplementedError


class EmpiricalCopulaSampler(ParamSampler):
    """Gaussian copula over normal scores with empirical-quantile marginals.

    The dependence is the correlation matrix of the normal scores of the
    (possibly bootstrap-augmented) observations; marginals are linearly
    interpolated empirical quantile functions.  ``tau`` is sampled as a
    continuous variable and snapped to the nearest admissible integer; draws
    are rejected until they fall inside the support.
    """

    def __init__(
        self,
        support: SupportSpec,
        corr: np.ndarray,
        marginals: tuple[np.ndarray, np.ndarray, np.ndarray],
        n_obs: int,
        bootstrap_augmented: bool = False,
    ):
        self.support = support
        self.corr = np.asarray(corr, dtype=float)
        self.marginals = tuple(np.sort(np.asarray(m, dtype=float)) for m in marginals)
        self.n_obs = int(n_obs)
        self.bootstrap_augmented = bool(bootstrap_augmented)
        self._chol = np.linalg.cholesky(_nearest_corr(self.corr))

    def _invert_marginal(self, dim: int, u: np.ndarray) -> np.ndarray:
        vals = self.marginals[dim]
        pp = (np.arange(vals.size) + 0.5) / vals.size
        return np.interp(u, pp, vals)

    def sample_n(self, n: int, rng: np.random.Generator):
        rho_out = np.empty(n)
        tau_out = np.empty(n, dtype=int)
        h_out = np.empty(n)
        filled = 0
        consecutive_rejects = 0
        while filled < n:
            m = max(n - filled, 64)
            z = rng.standard_normal((m, 3)) @ self._chol.T
            u = ndtr(z)
            rho = self._invert_marginal(0, u[:, 0])
            tau = _nearest_tau(self._invert_marginal(1, u[:, 1]), self.support.x)
            h = self._invert_marginal(2, u[:, 2])
            ok = self.support.contains(rho, tau, h)
            idx = np.flatnonzero(ok)
            if idx.size == 0:
                consecutive_rejects += m
            else:
                gaps = np.diff(np.concatenate(([-1], idx))) - 1
                longest = max(consecutive_rejects + int(gaps[0]), int(gaps.max()))
                if longest >= MAX_REJECTIONS:
                    raise EstimationError(
                        f"{MAX_REJECTIONS} consecutive rejections: fitted density is "
                        f"inconsistent with its support (side={self.support.side}, "
                        f"x={self.support.x})"
                    )
                consecutive_rejects = m - 1 - int(idx[-1])
                take = idx[: n - filled]
                rho_out[filled : filled + take.size] = rho[take]
                tau_out[filled : filled + take.size] = tau[take]
                h_out[filled : filled + take.size] = h[take]
                filled += take.size
            if consecutive_rejects >= MAX_REJECTIONS:
                raise EstimationError(
                    f"{MAX_REJECTIONS} consecutive rejections: fitted density is "
                    f"inconsistent with its support (side={self.support.side}, "
                    f"x={self.support.x})"
                )
        return rho_out, tau_out, h_out

    def to_dict(self) -> dict:
        return {
            "type": "copula",
            "support": self.support.to_dict(),
            "corr": self.corr.tolist(),
            "marginals": {
                "rho": self.marginals[0].tolist(),
                "tau": self.marginals[1].tolist(),
                "h": self.marginals[2].tolist(),
            },
            "n_obs": self.n_obs,
            "bootstrap_augmented": self.bootstrap_augmented,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EmpiricalCopulaSampler":
        return cls(
            support=SupportSpec.from_dict(data["support"]),
            corr=np.asarray(data["corr"]),
            marginals=(
                np.asarray(data["marginals"]["rho"]),
                np.asarray(data["marginals"]["tau"]),
                np.asarray(data["marginals"]["h"]),
            ),
            n_obs=data["n_obs"],
            bootstrap_augmented=data["bootstrap_augmented"],
        )


class DegenerateSampler(ParamSampler):
    """Always returns one fixed triplet; handy for tests and zero-noise runs."""

    def __init__(self, support: SupportSpec, rho: float, tau: int, h: float):
        self.support = support
        self.rho = float(rho)
        self.tau = int(tau)
        self.h = float(h)
        self.n_obs = 1
        self.bootstrap_augmented = False

    def sample_n(self, n: int, rng: np.random.Generator):
        return (
            np.full(n, self.rho),
            np.full(n, self.tau, dtype=int),
            np.full(n, self.h),
        )

    def to_dict(self) -> dict:
        return {
            "type": "degenerate",
            "support": self.support.to_dict(),
            "rho": self.rho,
            "tau": self.tau,
            "h": self.h,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DegenerateSampler":
        return cls(
            support=SupportSpec.from_dict(data["support"]),
            rho=data["rho"],
            tau=data["tau"],
            h=data["h"],
        )


def sampler_from_dict(data: dict) -> ParamSampler:
    kind = data.get("type")
    if kind == "copula":
        return EmpiricalCopulaSampler.from_dict(data)
    if kind == "degenerate":
        return DegenerateSampler.from_dict(data)
    raise InputError(f"unknown sampler type {kind!r}")


def _nearest_corr(corr: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Push a correlation matrix to the nearest comfortably PD one."""
    vals, vecs = np.linalg.eigh(corr)
    vals = np.maximum(vals, floor)
    fixed = vecs @ np.diag(vals) @ vecs.T
    d = np.sqrt(np.diag(fixed))
    return fixed / np.outer(d, d)


def _clamp_into_support(
    support: SupportSpec, rho: np.ndarray, tau: np.ndarray, h: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rho = np.clip(rho, support.rho_min, support.rho_max)
    tau = np.clip(tau, 1.0, float(support.x))
    hmax = support.h_max(rho, tau)
    ceiling = hmax if not support.h_open else hmax * (1.0 - 1e-9)
    h = np.minimum(h, np.maximum(ceiling, 1e-15))
    h = np.maximum(h, 1e-15)
    return rho, tau, h


def fit_joint_density(
    triplets,
    support: SupportSpec,
    min_sample: int = 10,
    rng: np.random.Generator | int | None = None,
) -> EmpiricalCopulaSampler:
    """Fit the joint ``(rho, tau, h)`` sampler for one segment class.

    Samples with fewer than ``min_sample`` observations are bootstrap-resampled
    up to ``min_sample`` with a small uniform jitter (1% of each marginal's
    observed range) so ranks are informative; jittered points are clamped back
    into the support.
    """
    data = np.asarray(triplets, dtype=float)
    if data.ndim == 1 and data.size == 3:
        data = data.reshape(1, 3)
    if data.ndim != 2 or data.shape[1] != 3 or data.shape[0] == 0:
        raise EstimationError("need a non-empty (n, 3) array of (rho, tau, h) observations")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    n_obs = data.shape[0]
    augmented = False
    if n_obs < min_sample:
        augmented = True
        picks = rng.integers(0, n_obs, size=min_sample)
        data = data[picks]
        widths = []
        fallback = (
            support.rho_max - support.rho_min or support.limit,
            max(support.x - 1, 1),
            max(float(np.max(data[:, 2])), support.limit),
        )
        for d in range(3):
            w = float(np.ptp(data[:, d]))
            widths.append(w if w > 0 else float(fallback[d]))
        jitter = rng.uniform(-1.0, 1.0, size=data.shape) * (0.01 * np.asarray(widths))
        data = data + jitter
        rho, tau, h = _clamp_into_support(support, data[:, 0], data[:, 1], data[:, 2])
        data = np.column_stack([rho, tau, h])

    scores = np.column_stack(
        [ndtri(rankdata(data[:, d]) / (data.shape[0] + 1.0)) for d in range(3)]
    )
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(scores, rowvar=False)
    corr = np.where(np.isfinite(corr), corr, 0.0)
    np.fill_diagonal(corr, 1.0)
    return EmpiricalCopulaSampler(
        support=support,
        corr=corr,
        marginals=(data[:, 0], data[:, 1], data[:, 2]),
        n_obs=n_obs,
        bootstrap_augmented=augmented,
    )


def sample_params(sampler: ParamSampler, seed) -> tuple[float, int, float]:
    """Draw one ``(rho, tau, h)`` from a fitted sampler, deterministically in ``seed``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sampler.sample(rng)


# ---------------------------------------------------------------------------
# Volatility estimation
# ---------------------------------------------------------------------------


def mle_sigma(error: ErrorPath, tau: int, x: int) -> float:
    """Exact Gaussian MLE of the bridge volatility from one error path.

    Only unclipped points carry information.  Walking the unclipped times
    ``u_1 < u_2 < ...`` (with ``u_0 = 0`` and ``Y(0) = 0``), each step
    contributes the squared innovation of the pinned-bridge transition, scaled
    by its variance factor; the horizon is ``tau`` before the peak and ``x+1``
    after it.  Selections landing exactly on a pinning time contribute nothing
    and are skipped (they still serve as conditioning points).
    """
    values = error.values
    if values.shape != (x,):
        raise InputError(f"error path must have length {x}")
    ks = np.flatnonzero(~error.clipped) + 1
    u_prev, y_prev = 0.0, 0.0
    terms = []
    for k in ks:
        u = float(k)
        y = float(values[k - 1])
        horizon = float(tau) if u <= tau else float(x + 1)
        if u == horizon:
            u_prev, y_prev = u, y
            continue
        mean = y_prev * (horizon - u) / (horizon - u_prev)
        var_factor = (u - u_prev) * (horizon - u) / (horizon - u_prev)
        terms.append((y - mean) ** 2 / var_factor)
        u_prev, y_prev = u, y
    if not terms:
        raise InsufficientDataError(
            "no informative unclipped increments; cannot estimate sigma"
        )
    return float(np.sqrt(np.mean(terms)))


# ---------------------------------------------------------------------------
# Box-Cox volatility regression
# ---------------------------------------------------------------------------


def box_cox(y, lam: float):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise InputError("Box-Cox transform requires positive values")
    if lam == 0.0:
        return np.log(y)
    return (y**lam - 1.0) / lam


def inv_box_cox(p, lam: float):
    p = np.asarray(p, dtype=float)
    if lam == 0.0:
        return np.exp(p)
    base = lam * p + 1.0
    if np.any(base <= 0):
        raise InputError("prediction outside the inverse Box-Cox domain")
    return base ** (1.0 / lam)


@dataclass
class SigmaModel:
    """Fitted volatility regression for one (i, j) pair."""

    lam: float
    coef: np.ndarray
    feature_names: tuple[str, ...]
    adj_r2: float
    resid_std: float
    n_outliers_removed: int
    n_obs: int
    sigma_floor: float = SIGMA_FLOOR
    floored_predictions: int = 0  # diagnostic counter, not serialized

    def __post_init__(self) -> None:
        self.coef = np.asarray(self.coef, dtype=float)
        self.feature_names = tuple(self.feature_names)
        if self.coef.shape != (len(self.feature_names),):
            raise InputError("one coefficient per feature required")

    def predict(self, rho: float, tau: float, h: float, x: float) -> float:
        return predict_sigma(self, rho, tau, h, x)

    @classmethod
    def constant(cls, sigma: float, sigma_floor: float = SIGMA_FLOOR) -> "SigmaModel":
        """Intercept-only fallback returning a fixed volatility."""
        sigma = max(float(sigma), sigma_floor)
        return cls(
            lam=0.0,
            coef=np.array([np.log(sigma)]),
            feature_names=("const",),
            adj_r2=float("nan"),
            resid_std=0.0,
            n_outliers_removed=0,
            n_obs=0,
            sigma_floor=sigma_floor,
        )

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "coef": self.coef.tolist(),
            "feature_names": list(self.feature_names),
            "adj_r2": self.adj_r2,
            "resid_std": self.resid_std,
            "n_outliers_removed": self.n_outliers_removed,
            "n_obs": self.n_obs,
            "sigma_floor": self.sigma_floor,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SigmaModel":
        return cls(
            lam=float(data["lambda"]),
            coef=np.asarray(data["coef"]),
            feature_names=tuple(data["feature_names"]),
            adj_r2=float(data["adj_r2"]),
            resid_std=float(data["resid_std"]),
            n_outliers_removed=int(data["n_outliers_removed"]),
            n_obs=int(data["n_obs"]),
            sigma_floor=float(data["sigma_floor"]),
        )


def _design_matrix(rho, tau, h, x) -> np.ndarray:
    rho, tau, h, x = (np.asarray(a, dtype=float) for a in (rho, tau, h, x))
    cols = [
        np.ones_like(rho), rho, tau, h, x,
        rho * tau, rho * h, rho * x, tau * h, tau * x, h * x,
    ]
    return np.column_stack(cols)


def _normality_score(resid: np.ndarray) -> float:
    """Squared correlation of the residual normal quantile plot."""
    n = resid.size
    osm = ndtri((np.arange(1, n + 1) - 0.5) / n)
    osr = np.sort(resid)
    if np.ptp(osr) == 0:
        return 0.0
    r = np.corrcoef(osm, osr)[0, 1]
    return float(r * r)


def _check_rank(X: np.ndarray, names: tuple[str, ...]) -> None:
    _, r, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    bad = [names[piv[k]] for k in range(len(diag)) if diag[k] <= tol]
    if bad:
        raise EstimationError(f"rank-deficient design; collinear terms: {', '.join(sorted(bad))}")


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta, y - X @ beta


LAMBDA_GRID = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.05), 2)


def fit_sigma_regression(
    observations,
    sigma_floor: float = SIGMA_FLOOR,
    lambda_grid: np.ndarray = LAMBDA_GRID,
) -> SigmaModel:
    """Fit the Box-Cox-transformed linear model for the volatility.

    ``observations`` holds rows ``(sigma_hat, rho, tau, h, x)``.  The Box-Cox
    exponent is picked from a grid to maximize residual normality, a first fit
    drops observations whose Cook's distance exceeds ``median + 3 * IQR``, and
    the final coefficients come from a second fit on the remainder.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 5:
        raise InputError("observations must be rows of (sigma_hat, rho, tau, h, x)")
    sig = np.maximum(obs[:, 0], sigma_floor)
    X = _design_matrix(obs[:, 1], obs[:, 2], obs[:, 3], obs[:, 4])
    p = X.shape[1]
    if obs.shape[0] < 2 * p:
        raise InsufficientDataError(
            f"need at least {2 * p} observations for {p} coefficients, got {obs.shape[0]}"
        )
    _check_rank(X, REGRESSOR_NAMES)

    best_lam, best_score = None, -np.inf
    for lam in lambda_grid:
        y = box_cox(sig, float(lam))
        _, resid = _ols(X, y)
        score = _normality_score(resid)
        if score > best_score:
            best_lam, best_score = float(lam), score
    assert best_lam is not None

    y = box_cox(sig, best_lam)
    _, resid = _ols(X, y)

    # Cook's distances from the first fit; Tukey rule on their distribution.
    q_thin = np.linalg.qr(X, mode="reduced")[0]
    leverage = np.clip(np.sum(q_thin * q_thin, axis=1), 0.0, 1.0 - 1e-12)
    dof = max(obs.shape[0] - p, 1)
    s2 = float(resid @ resid) / dof
    cooks = resid**2 * leverage / (p * max(s2, 1e-300) * (1.0 - leverage) ** 2)
    q1, med, q3 = np.percentile(cooks, [25, 50, 75])
    keep = cooks <= med + 3.0 * (q3 - q1)
    n_out = int((~keep).sum())
    if keep.sum() < p + 1:
        keep = np.ones_like(keep, dtype=bool)
        n_out = 0

    X2, y2 = X[keep], y[keep]
    beta, resid2 = _ols(X2, y2)
    n2 = X2.shape[0]
    ss_res = float(resid2 @ resid2)
    ss_tot = float(np.sum((y2 - y2.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    adj_r2 = 1.0 - (1.0 - r2) * (n2 - 1) / max(n2 - p, 1)
    resid_std = float(np.sqrt(ss_res / max(n2 - p, 1)))
    return SigmaModel(
        lam=best_lam,
        coef=beta,
        feature_names=REGRESSOR_NAMES,
        adj_r2=float(adj_r2),
        resid_std=resid_std,
        n_outliers_removed=n_out,
        n_obs=int(n2),
        sigma_floor=sigma_floor,
    )


def predict_sigma(model: SigmaModel, rho: float, tau: float, h: float, x: float) -> float:
    """Volatility prediction: anti-transformed linear response, floored."""
    if model.feature_names == ("const",):
        pred = float(model.coef[0])
    else:
        row = _design_matrix([rho], [tau], [h], [x])[0]
        pred = float(row @ model.coef)
    try:
        sigma = float(inv_box_cox(pred, model.lam))
    except InputError:
        model.floored_predictions += 1
        log = logger.warning if model.floored_predictions == 1 else logger.debug
        log(
            "sigma prediction %.4g outside the inverse transform domain "
            "(lambda=%.2f); flooring (occurrence %d)",
            pred, model.lam, model.floored_predictions,
        )
        return model.sigma_floor
    return max(sigma, model.sigma_floor)
