"""Path simulation: per-segment charge paths, battery SOC and penalty paths,
and Monte Carlo estimation of the discounted cumulative penalty moments.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bridge import (
    SIGMA_FLOOR,
    BridgeParams,
    clip_error,
    sample_latent_bridge,
    triangle_path,
)
from .errors import InputError, SimulationError
from .estimation import (
    ParamSampler,
    SigmaModel,
    attainable_param_support,
    predict_sigma,
)
from .segmentation import SemiMarkovKernel

__all__ = [
    "BatterySpec",
    "PenaltySpec",
    "PenaltyPath",
    "ChargeModel",
    "DEFAULT_BATTERY",
    "DEFAULT_FEES",
    "charge_from_params",
    "simulate_charge",
    "simulate_penalty_path",
    "discounted_penalty",
    "MomentTable",
    "mc_moments",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatterySpec:
    """State-of-charge band (MWh) and where the battery starts inside it."""

    soc_min: float
    soc_max: float
    soc_init: float

    def __post_init__(self) -> None:
        if not self.soc_min <= self.soc_max:
            raise InputError(f"need soc_min <= soc_max, got {self.soc_min} > {self.soc_max}")
        if not self.soc_min <= self.soc_init <= self.soc_max:
            raise InputError(f"initial SOC {self.soc_init} outside [{self.soc_min}, {self.soc_max}]")


@dataclass(frozen=True)
class PenaltySpec:
    """Fees (per MWh) for unserved charge/discharge and the per-step discount rate."""

    up_fee: float
    down_fee: float
    discount_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.up_fee < 0 or self.down_fee < 0:
            raise InputError("fees must be nonnegative")
        if self.discount_rate < 0:
            raise InputError("discount rate must be nonnegative")


#: 0.36 MWh module, started half full.
DEFAULT_BATTERY = BatterySpec(soc_min=0.0, soc_max=0.36, soc_init=0.18)
#: Up/down regulation fees in EUR/MWh.
DEFAULT_FEES = PenaltySpec(up_fee=21.52, down_fee=26.50, discount_rate=0.0)


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def charge_from_params(
    params: BridgeParams, x: int, limit: float, rng: np.random.Generator,
    sigma_floor: float = SIGMA_FLOOR,
) -> np.ndarray:
    """Charge path ``c(0..x+1)`` for given bridge parameters.

    Volatilities at the floor give the clipped triangle; otherwise the latent
    two-piece bridge is sampled, clipped into the feasible band, and added to
    the triangle.  Every value lies in ``[0, rho - (k-1)*limit]`` and the
    endpoints are exactly zero.
    """
    if x < 1:
        raise InputError(f"sojourn must be >= 1, got {x}")
    if x == 1:
        c1 = min(max(params.h, 0.0), params.rho)
        return np.array([0.0, c1, 0.0])
    g = triangle_path(params, x)
    # volatilities within rounding of the floor count as "no noise"
    if params.sigma <= sigma_floor * (1.0 + 1e-9):
        latent = np.zeros(x)
    else:
        latent = sample_latent_bridge(x, params.tau, params.sigma, rng)[0]
    err = clip_error(latent, params, x, limit)
    out = g.copy()
    out[1 : x + 1] += err.values
    out[0] = 0.0
    out[x + 1] = 0.0
    return out


def simulate_charge(
    i: int, j: int, x: int,
    sampler: ParamSampler, sigma_model: SigmaModel,
    limit: float, seed, sigma_floor: float = SIGMA_FLOOR,
) -> np.ndarray:
    """Sample parameters, predict the volatility, and simulate one charge path."""
    if i not in (-1, 1):
        raise InputError("charge paths exist only for charging or discharging segments")
    rng = _as_rng(seed)
    rho, tau, h = sampler.sample(rng)
    sigma = predict_sigma(sigma_model, rho, tau, h, x)
    params = BridgeParams(rho=rho, tau=tau, h=h, sigma=sigma)
    return charge_from_params(params, x, limit, rng, sigma_floor)


class ChargeModel:
    """Registry of fitted samplers and volatility models for one ramp limit.

    Sojourns without a fitted sampler for their (i, j) pair fall back to the
    nearest fitted sojourn length, with the drawn parameters clamped into the
    support of the actual length.
    """

    def __init__(
        self,
        samplers: dict[tuple[int, int, int], ParamSampler],
        sigma_models: dict[tuple[int, int], SigmaModel],
        limit: float,
        capacity: float,
        sigma_default: float = SIGMA_FLOOR,
        sigma_floor: float = SIGMA_FLOOR,
    ):
        self.samplers = dict(samplers)
        self.sigma_models = dict(sigma_models)
        self.limit = float(limit)
        self.capacity = float(capacity)
        self.sigma_default = float(sigma_default)
        self.sigma_floor = float(sigma_floor)
        self._x_by_pair: dict[tuple[int, int], np.ndarray] = {}
        for (i, j, x) in self.samplers:
            self._x_by_pair.setdefault((i, j), [])  # type: ignore[arg-type]
        for (i, j, x) in self.samplers:
            self._x_by_pair[(i, j)].append(x)  # type: ignore[union-attr]
        self._x_by_pair = {k: np.sort(np.asarray(v)) for k, v in self._x_by_pair.items()}

    def sampler_for(self, i: int, j: int, x: int) -> tuple[ParamSampler, bool]:
        """Exact sampler if fitted, else the nearest-sojourn fallback."""
        key = (i, j, x)
        if key in self.samplers:
            return self.samplers[key], False
        xs = self._x_by_pair.get((i, j))
        if xs is None or xs.size == 0:
            raise SimulationError(f"no fitted sampler for pair (i={i}, j={j})")
        nearest = int(xs[np.argmin(np.abs(xs - x))])
        logger.debug("no sampler for (%d, %d, x=%d); falling back to x=%d", i, j, x, nearest)
        return self.samplers[(i, j, nearest)], True

    def sigma_model_for(self, i: int, j: int) -> SigmaModel:
        model = self.sigma_models.get((i, j))
        if model is None:
            return SigmaModel.constant(self.sigma_default, self.sigma_floor)
        return model

    def charge_path(self, i: int, j: int, x: int, rng: np.random.Generator) -> np.ndarray:
        """Charge path ``c(0..x+1)``; identically zero in the idle state."""
        if i == 0:
            return np.zeros(x + 2)
        sampler, fell_back = self.sampler_for(i, j, x)
        rho, tau, h = sampler.sample(rng)
        if fell_back:
            support = attainable_param_support(i, x, self.limit, self.capacity)
            rho = float(np.clip(rho, support.rho_min, support.rho_max))
            tau = int(np.clip(tau, 1, x))
            hmax = float(support.h_max(rho, tau))
            h = float(min(max(h, 1e-15), max(hmax, 1e-15)))
        sigma = predict_sigma(self.sigma_model_for(i, j), rho, tau, h, x)
        params = BridgeParams(rho=rho, tau=tau, h=h, sigma=sigma)
        return charge_from_params(params, x, self.limit, rng, self.sigma_floor)


@dataclass
class PenaltyPath:
    """One simulated trajectory of the battery and its penalties.

    Step arrays run over ``k = 0..T``; ``soc[0]`` is the initial state of
    charge and ``penalty[0] == 0``.  ``discounted`` is the running
    discount-weighted sum of ``penalty``.
    """

    states: np.ndarray
    jump_times: np.ndarray
    step_states: np.ndarray
    soc: np.ndarray
    penalty: np.ndarray
    discounted: np.ndarray
    backward: np.ndarray


def discounted_penalty(penalty: np.ndarray, rate: float) -> np.ndarray:
    """Running sum of ``penalty[m] * exp(-rate * m)``; nondecreasing for r >= 0."""
    if rate < 0:
        raise InputError("discount rate must be nonnegative")
    m = np.asarray(penalty, dtype=float)
    weights = np.exp(-rate * np.arange(m.size))
    return np.cumsum(m * weights)


def simulate_penalty_path(
    kernel: SemiMarkovKernel,
    charge_model: ChargeModel,
    battery: BatterySpec,
    fees: PenaltySpec,
    n_transitions: int | None = None,
    initial_state: int = 0,
    initial_soc: float | None = None,
    initial_backward: int = 0,
    seed=None,
    horizon: int | None = None,
) -> PenaltyPath:
    """Simulate the renewal chain with its SOC and penalty processes.

    Sojourns come from the kernel's sojourn marginal, successors from its
    conditional transition law, charges from ``charge_model``.  Charging moves
    the SOC up (capped at the maximum), discharging moves it down (floored at
    the minimum), and the penalty charges the fee on whatever part of the
    charge did not fit.  A positive ``initial_backward`` resumes ``b`` steps
    into the first sojourn: its total length is drawn conditional on exceeding
    ``b`` and the first ``b`` charge values are skipped.

    Runs ``n_transitions`` jumps or until ``horizon`` steps are covered,
    whichever comes first (at least one of the two must be given).
    """
    if n_transitions is None and horizon is None:
        raise InputError("give n_transitions, horizon, or both")
    if n_transitions is not None and n_transitions < 1:
        raise InputError("need at least one transition")
    if initial_backward < 0:
        raise InputError("backward time must be nonnegative")
    rng = _as_rng(seed)
    soc0 = battery.soc_init if initial_soc is None else float(initial_soc)
    if not battery.soc_min <= soc0 <= battery.soc_max:
        raise InputError(f"initial SOC {soc0} outside the battery band")

    states = [int(initial_state)]
    jump_times = [0]
    soc = [soc0]
    penalty = [0.0]
    backward = [int(initial_backward)]
    step_states: list[int] = [int(initial_state)]

    state = int(initial_state)
    time = 0
    n = 0
    truncated = False
    while not truncated:
        if n_transitions is not None and n >= n_transitions:
            break
        if horizon is not None and time > horizon:
            break
        offset = initial_backward if n == 0 else 0
        x = kernel.sample_sojourn(state, rng, longer_than=offset)
        nxt = kernel.sample_successor(state, x, rng)
        charges = charge_model.charge_path(state, nxt, x, rng)
        # The segment entered at `time` covers steps time..time+x-offset-1;
        # the charge at step t has in-segment index B(t)+1.  S(0) is exogenous,
        # so the charge landing on step 0 never moves it.
        for d in range(x - offset):
            t = time + d
            if t == 0:
                continue
            if horizon is not None and t > horizon:
                truncated = True
                break
            c = float(charges[offset + d + 1])
            s_prev = soc[-1]
            if state == 1:
                m = fees.up_fee * max(c - (battery.soc_max - s_prev), 0.0)
                s = min(s_prev + c, battery.soc_max)
            elif state == -1:
                m = fees.down_fee * max(c - (s_prev - battery.soc_min), 0.0)
                s = max(s_prev - c, battery.soc_min)
            else:
                m = 0.0
                s = s_prev
            soc.append(s)
            penalty.append(m)
            backward.append(offset + d)
            step_states.append(state)
        time += x - offset
        jump_times.append(time)
        states.append(nxt)
        state = nxt
        n += 1

    m_arr = np.asarray(penalty)
    return PenaltyPath(
        states=np.asarray(states, dtype=int),
        jump_times=np.asarray(jump_times, dtype=int),
        step_states=np.asarray(step_states, dtype=int),
        soc=np.asarray(soc),
        penalty=m_arr,
        discounted=discounted_penalty(m_arr, fees.discount_rate),
        backward=np.asarray(backward, dtype=int),
    )


@dataclass
class MomentTable:
    """Per-step sampling moments of the discounted cumulative penalty."""

    steps: np.ndarray
    moments: list[np.ndarray] = field(default_factory=list)
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    std: np.ndarray = field(default=None)  # type: ignore[assignment]
    se_mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    n_paths: int = 0


def mc_moments(
    path_generator,
    n_paths: int,
    horizon: int,
    order: int = 2,
    fees: PenaltySpec = DEFAULT_FEES,
) -> MomentTable:
    """Monte Carlo sampling moments of ``W(t) = sum_{k<=t} M(k) exp(-r k)``.

    ``path_generator(n)`` must return the penalty array ``M(0..>=horizon)`` of
    the ``n``-th path.  Returns the first ``order`` raw moments per step plus
    the sample standard deviation (n-1 denominator) and the Monte Carlo
    standard error of the mean.
    """
    if n_paths < 2:
        raise InputError("need at least 2 paths for moment estimates")
    if order < 1:
        raise InputError("moment order must be >= 1")
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    weights = np.exp(-fees.discount_rate * np.arange(1, horizon + 1))
    w = np.empty((n_paths, horizon))
    for n in range(n_paths):
        try:
            m = np.asarray(path_generator(n), dtype=float)
        except Exception as exc:  # noqa: BLE001 - annotate the failing path
            raise SimulationError(f"path {n} failed: {exc}") from exc
        if m.size < horizon + 1:
            raise SimulationError(
                f"path {n} covers {m.size - 1} steps, needs at least {horizon}"
            )
        w[n] = np.cumsum(m[1 : horizon + 1] * weights)
    moments = [w.mean(axis=0)]
    for a in range(2, order + 1):
        moments.append((w**a).mean(axis=0))
    std = w.std(axis=0, ddof=1)
    return MomentTable(
        steps=np.arange(1, horizon + 1),
        moments=moments,
        mean=moments[0],
        std=std,
        se_mean=std / np.sqrt(n_paths),
        n_paths=n_paths,
    )
