"""Batch pipeline: run configuration, artifact files, seeding, and the stages
ingest -> correct -> segment -> fit -> simulate -> validate.

Every artifact is stamped with the configuration hash and master seed, and all
randomness is drawn from streams keyed by (seed, stage, ...), so a rerun with
the same configuration is byte-identical and adding paths never perturbs
existing ones.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bridge import SIGMA_FLOOR, BridgeParams, compute_initial_power, decompose, embed_bridge, extract_peak
from .errors import (
    EstimationError,
    InputError,
    InsufficientDataError,
    SimulationError,
    WindBridgeError,
)
from .estimation import (
    SigmaModel,
    attainable_param_support,
    fit_joint_density,
    fit_sigma_regression,
    mle_sigma,
    sampler_from_dict,
)
from .power import (
    DEFAULT_TURBINE,
    PowerSeries,
    RampPolicy,
    TurbineSpec,
    apply_ramp_limit,
    generate_synthetic_wind,
    read_power_csv,
    read_wind_csv,
    wind_to_power,
    write_power_csv,
    write_wind_csv,
)
from .segmentation import Segment, SemiMarkovKernel, estimate_kernel, extract_segments, step_states
from .simulate import (
    DEFAULT_BATTERY,
    DEFAULT_FEES,
    BatterySpec,
    ChargeModel,
    PenaltySpec,
    mc_moments,
    simulate_penalty_path,
)
from .validation import (
    ComparisonReport,
    compare_segments,
    daily_penalty_moments,
    day_start_conditions,
    empirical_penalty,
    mape_detail,
)

__all__ = [
    "STAGES",
    "SyntheticWindSpec",
    "RunConfig",
    "load_config",
    "config_hash",
    "run_pipeline",
    "run_stage",
    "build_model_doc",
    "charge_model_from_doc",
    "load_charge_model",
]

logger = logging.getLogger(__name__)

STAGES = ("ingest", "correct", "segment", "fit", "simulate", "validate")
_STAGE_IDS = {name: idx + 1 for idx, name in enumerate(STAGES)}


@dataclass(frozen=True)
class SyntheticWindSpec:
    n_steps: int = 50_000
    shape: float = 2.0
    scale: float = 8.0
    autocorrelation: float = 0.9

    def __post_init__(self) -> None:
        if self.n_steps < 2:
            raise InputError("synthetic wind needs at least 2 steps")


@dataclass
class RunConfig:
    """Everything one batch run needs; hashable into a reproducibility stamp."""

    out_dir: Path
    wind_csv: Path | None = None
    synthetic: SyntheticWindSpec = field(default_factory=SyntheticWindSpec)
    turbine: TurbineSpec = DEFAULT_TURBINE
    limits: tuple[float, ...] = (0.01, 0.05, 0.07)
    battery: BatterySpec = DEFAULT_BATTERY
    fees: PenaltySpec = DEFAULT_FEES
    horizon: int = 24
    n_paths: int = 2000
    moment_order: int = 2
    seed: int = 12345
    eligibility: int = 30
    min_group_sample: int = 10
    dump_paths: bool = False

    def __post_init__(self) -> None:
        self.out_dir = Path(self.out_dir)
        self.limits = tuple(float(l) for l in self.limits)
        if not self.limits:
            raise InputError("at least one ramp limit is required")
        if any(not 0.0 < l <= 1.0 for l in self.limits):
            raise InputError(f"limits must be fractions in (0, 1], got {self.limits}")
        if self.horizon < 1:
            raise InputError("horizon must be >= 1")
        if self.n_paths < 1:
            raise InputError("path count must be >= 1")
        if self.seed < 0:
            raise InputError("seed must be nonnegative")

    def limit_mw(self, fraction: float) -> float:
        return fraction * self.turbine.rated_capacity

    def limit_tag(self, fraction: float) -> str:
        return f"{fraction:g}"


def config_hash(cfg: RunConfig) -> str:
    """Short digest of everything that affects the outputs (the out dir does not)."""
    parts = [
        f"wind_csv={cfg.wind_csv}",
        f"synthetic={cfg.synthetic}",
        f"turbine={cfg.turbine}",
        f"limits={cfg.limits}",
        f"battery={cfg.battery}",
        f"fees={cfg.fees}",
        f"horizon={cfg.horizon}",
        f"n_paths={cfg.n_paths}",
        f"moment_order={cfg.moment_order}",
        f"seed={cfg.seed}",
        f"eligibility={cfg.eligibility}",
        f"min_group_sample={cfg.min_group_sample}",
    ]
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]


def load_config(path: str | Path, out_dir: str | Path | None = None) -> RunConfig:
    """Parse the INI-style run configuration."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read(path)

    kwargs: dict = {}
    if parser.has_option("input", "wind_csv"):
        kwargs["wind_csv"] = Path(parser.get("input", "wind_csv"))
    if parser.has_section("synthetic"):
        s = parser["synthetic"]
        kwargs["synthetic"] = SyntheticWindSpec(
            n_steps=s.getint("n_steps", 50_000),
            shape=s.getfloat("shape", 2.0),
            scale=s.getfloat("scale", 8.0),
            autocorrelation=s.getfloat("autocorrelation", 0.9),
        )
    if parser.has_section("turbine"):
        t = parser["turbine"]
        kwargs["turbine"] = TurbineSpec(
            cut_in_speed=t.getfloat("cut_in_speed", 4.0),
            rated_speed=t.getfloat("rated_speed", 13.0),
            cut_out_speed=t.getfloat("cut_out_speed", 25.0),
            rated_capacity=t.getfloat("rated_capacity", 2.0),
        )
    if parser.has_option("policy", "limits"):
        raw = parser.get("policy", "limits").replace(",", " ").split()
        kwargs["limits"] = tuple(float(v) for v in raw)
    if parser.has_section("battery"):
        b = parser["battery"]
        soc_max = b.getfloat("soc_max", 0.36)
        kwargs["battery"] = BatterySpec(
            soc_min=b.getfloat("soc_min", 0.0),
            soc_max=soc_max,
            soc_init=b.getfloat("soc_init", soc_max / 2.0),
        )
    if parser.has_section("fees"):
        f = parser["fees"]
        kwargs["fees"] = PenaltySpec(
            up_fee=f.getfloat("up", 21.52),
            down_fee=f.getfloat("down", 26.50),
            discount_rate=f.getfloat("discount_rate", 0.0),
        )
    if parser.has_section("simulation"):
        s = parser["simulation"]
        kwargs["horizon"] = s.getint("horizon", 24)
        kwargs["n_paths"] = s.getint("paths", 2000)
        kwargs["moment_order"] = s.getint("moment_order", 2)
        kwargs["seed"] = s.getint("seed", 12345)
    if parser.has_option("validation", "eligibility"):
        kwargs["eligibility"] = parser.getint("validation", "eligibility")
    if out_dir is None:
        out_dir = parser.get("output", "dir", fallback="windbridge_out")
    return RunConfig(out_dir=Path(out_dir), **kwargs)


# ---------------------------------------------------------------------------
# Artifact plumbing
# ---------------------------------------------------------------------------


def _stamp(cfg: RunConfig) -> str:
    return f"config_hash={config_hash(cfg)} seed={cfg.seed}"


def _rng(cfg: RunConfig, stage: str, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((cfg.seed, _STAGE_IDS[stage], *key)))


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise InputError(f"[{stage}] missing upstream artifact: {path}")
    return path


@contextmanager
def _atomic(path: Path):
    """Write to ``<name>.partial`` and publish on success; failures leave the partial."""
    tmp = path.with_name(path.name + ".partial")
    yield tmp
    os.replace(tmp, path)


def _artifact(cfg: RunConfig, name: str) -> Path:
    return cfg.out_dir / name


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(cfg: RunConfig) -> list[Path]:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.wind_csv is not None:
        speeds = read_wind_csv(cfg.wind_csv)
    else:
        speeds = generate_synthetic_wind(
            cfg.synthetic.n_steps,
            shape=cfg.synthetic.shape,
            scale=cfg.synthetic.scale,
            autocorrelation=cfg.synthetic.autocorrelation,
            seed=_rng(cfg, "ingest"),
        )
    power = wind_to_power(speeds, cfg.turbine)
    wind_path = _artifact(cfg, "wind.csv")
    power_path = _artifact(cfg, "power.csv")
    with _atomic(wind_path) as tmp:
        write_wind_csv(tmp, speeds, comment=_stamp(cfg))
    with _atomic(power_path) as tmp:
        write_power_csv(tmp, PowerSeries(generated=power), comment=_stamp(cfg))
    return [wind_path, power_path]


def stage_correct(cfg: RunConfig) -> list[Path]:
    series = read_power_csv(_require(_artifact(cfg, "power.csv"), "correct"))
    out = []
    for frac in cfg.limits:
        policy = RampPolicy(limit=cfg.limit_mw(frac))
        corrected = apply_ramp_limit(series, policy, capacity=cfg.turbine.rated_capacity)
        path = _artifact(cfg, f"corrected_{cfg.limit_tag(frac)}.csv")
        with _atomic(path) as tmp:
            write_power_csv(tmp, corrected, comment=_stamp(cfg))
        out.append(path)
    return out


def _load_corrected(cfg: RunConfig, frac: float, stage: str) -> PowerSeries:
    path = _require(_artifact(cfg, f"corrected_{cfg.limit_tag(frac)}.csv"), stage)
    series = read_power_csv(path)
    if series.corrected is None:
        raise InputError(f"[{stage}] artifact {path} has no corrected column")
    return series


def stage_segment(cfg: RunConfig) -> list[Path]:
    out = []
    for frac in cfg.limits:
        series = _load_corrected(cfg, frac, "segment")
        points, _ = extract_segments(series)
        kernel = estimate_kernel(points)
        path = _artifact(cfg, f"kernel_{cfg.limit_tag(frac)}.json")
        with _atomic(path) as tmp:
            kernel.to_json(
                tmp,
                config_hash=config_hash(cfg),
                seed=cfg.seed,
                limit_mw=cfg.limit_mw(frac),
            )
        out.append(path)
    return out


def _segment_params(seg: Segment, limit: float, capacity: float) -> tuple[float, int, float]:
    bridge = embed_bridge(seg)
    tau, h = extract_peak(bridge)
    rho = compute_initial_power(seg.i, seg.entry_power, seg.x, limit, capacity)
    return rho, tau, h


def build_model_doc(
    segments: list[Segment],
    limit: float,
    capacity: float,
    min_group_sample: int = 10,
    group_rng=None,
) -> dict:
    """Fit every per-class sampler and per-pair volatility model.

    ``group_rng(i, j, x)`` supplies the random stream used when a thin class
    needs bootstrap augmentation; it defaults to fresh unseeded generators.
    Returns the JSON-ready model document.
    """
    if group_rng is None:
        group_rng = lambda i, j, x: np.random.default_rng()  # noqa: E731

    by_key: dict[tuple[int, int, int], list[Segment]] = {}
    for seg in segments:
        if seg.censored or seg.i == 0 or seg.j is None:
            continue
        by_key.setdefault(seg.key, []).append(seg)

    samplers: dict[str, dict] = {}
    sigma_obs: dict[tuple[int, int], list[tuple[float, float, int, float, int]]] = {}
    for key in sorted(by_key):
        i, j, x = key
        group = by_key[key]
        support = attainable_param_support(i, x, limit, capacity)
        triplets = []
        for seg in group:
            rho, tau, h = _segment_params(seg, limit, capacity)
            if h <= 0.0:
                continue  # flat (all-zero) bridge carries no parameter information
            triplets.append((rho, tau, h))
            if x >= 2:
                bridge = embed_bridge(seg)
                err = decompose(bridge, BridgeParams(rho=rho, tau=tau, h=h), limit)
                try:
                    s_hat = mle_sigma(err, tau, x)
                except InsufficientDataError:
                    continue
                sigma_obs.setdefault((i, j), []).append((s_hat, rho, tau, h, x))
        if not triplets:
            continue
        sampler = fit_joint_density(
            triplets, support, min_sample=min_group_sample, rng=group_rng(i, j, x)
        )
        samplers[f"{i},{j},{x}"] = sampler.to_dict()

    all_sigmas = [s for obs in sigma_obs.values() for (s, *_rest) in obs]
    sigma_default = float(np.exp(np.mean(np.log(np.maximum(all_sigmas, SIGMA_FLOOR))))) if all_sigmas else SIGMA_FLOOR

    sigma_models: dict[str, dict] = {}
    for pair in sorted(sigma_obs):
        obs = np.asarray(sigma_obs[pair], dtype=float)
        try:
            model = fit_sigma_regression(obs)
        except (InsufficientDataError, EstimationError) as exc:
            pooled = float(np.exp(np.mean(np.log(np.maximum(obs[:, 0], SIGMA_FLOOR)))))
            logger.info(
                "sigma regression for pair %s fell back to a constant (%s)", pair, exc
            )
            model = SigmaModel.constant(pooled)
        sigma_models[f"{pair[0]},{pair[1]}"] = model.to_dict()

    return {
        "limit_mw": limit,
        "capacity_mw": capacity,
        "sigma_floor": SIGMA_FLOOR,
        "sigma_default": sigma_default,
        "samplers": samplers,
        "sigma_models": sigma_models,
    }


def charge_model_from_doc(doc: dict) -> ChargeModel:
    samplers = {}
    for key, data in doc["samplers"].items():
        i, j, x = (int(v) for v in key.split(","))
        samplers[(i, j, x)] = sampler_from_dict(data)
    sigma_models = {}
    for key, data in doc["sigma_models"].items():
        i, j = (int(v) for v in key.split(","))
        sigma_models[(i, j)] = SigmaModel.from_dict(data)
    return ChargeModel(
        samplers=samplers,
        sigma_models=sigma_models,
        limit=doc["limit_mw"],
        capacity=doc["capacity_mw"],
        sigma_default=doc["sigma_default"],
        sigma_floor=doc["sigma_floor"],
    )


def _fit_limit(cfg: RunConfig, frac: float, limit_index: int) -> dict:
    series = _load_corrected(cfg, frac, "fit")
    _, segments = extract_segments(series)
    doc = build_model_doc(
        segments,
        limit=cfg.limit_mw(frac),
        capacity=cfg.turbine.rated_capacity,
        min_group_sample=cfg.min_group_sample,
        group_rng=lambda i, j, x: _rng(cfg, "fit", limit_index, i + 2, j + 2, x),
    )
    doc["config_hash"] = config_hash(cfg)
    doc["seed"] = cfg.seed
    return doc


def stage_fit(cfg: RunConfig) -> list[Path]:
    out = []
    for idx, frac in enumerate(cfg.limits):
        doc = _fit_limit(cfg, frac, idx)
        path = _artifact(cfg, f"model_{cfg.limit_tag(frac)}.json")
        with _atomic(path) as tmp:
            with open(tmp, "w") as fh:
                json.dump(doc, fh, sort_keys=True, indent=1)
                fh.write("\n")
        out.append(path)
    return out


def load_charge_model(path: str | Path) -> ChargeModel:
    """Rebuild a ChargeModel from a fitted-model JSON artifact."""
    with open(path) as fh:
        return charge_model_from_doc(json.load(fh))


def _write_csv(path: Path, header: list[str], rows: list[list], comment: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def stage_simulate(cfg: RunConfig) -> list[Path]:
    out = []
    for idx, frac in enumerate(cfg.limits):
        tag = cfg.limit_tag(frac)
        kernel = SemiMarkovKernel.from_json(_require(_artifact(cfg, f"kernel_{tag}.json"), "simulate"))
        model = load_charge_model(_require(_artifact(cfg, f"model_{tag}.json"), "simulate"))

        def generate(n: int):
            return simulate_penalty_path(
                kernel, model, cfg.battery, cfg.fees,
                horizon=cfg.horizon, seed=_rng(cfg, "simulate", idx, n),
            ).penalty

        table = mc_moments(generate, cfg.n_paths, cfg.horizon, cfg.moment_order, cfg.fees)
        rows = [
            [int(t), repr(float(m)), repr(float(s)), repr(float(se))]
            for t, m, s, se in zip(table.steps, table.mean, table.std, table.se_mean)
        ]
        path = _artifact(cfg, f"moments_{tag}.csv")
        with _atomic(path) as tmp:
            _write_csv(tmp, ["t", "mean", "std", "se_mean"], rows, _stamp(cfg))
        out.append(path)

        if cfg.dump_paths:
            sample = simulate_penalty_path(
                kernel, model, cfg.battery, cfg.fees,
                horizon=cfg.horizon, seed=_rng(cfg, "simulate", idx, 0),
            )
            rows = [
                [int(k), int(st), repr(float(s)), repr(float(m)), repr(float(w))]
                for k, (st, s, m, w) in enumerate(
                    zip(sample.step_states, sample.soc, sample.penalty, sample.discounted)
                )
            ]
            dump = _artifact(cfg, f"paths_{tag}.csv")
            with _atomic(dump) as tmp:
                _write_csv(tmp, ["k", "state", "S", "M", "W"], rows, _stamp(cfg))
            out.append(dump)
    return out


def stage_validate(cfg: RunConfig) -> list[Path]:
    out = []
    for idx, frac in enumerate(cfg.limits):
        tag = cfg.limit_tag(frac)
        series = _load_corrected(cfg, frac, "validate")
        kernel = SemiMarkovKernel.from_json(_require(_artifact(cfg, f"kernel_{tag}.json"), "validate"))
        model = load_charge_model(_require(_artifact(cfg, f"model_{tag}.json"), "validate"))
        points, segments = extract_segments(series)

        report = compare_segments(
            segments, model, rng=_rng(cfg, "validate", idx, 1), eligibility=cfg.eligibility
        )

        # Empirical penalty statistics from the observed series.
        n = len(series)
        states = step_states(points, n)
        charges = np.abs(series.generated - series.corrected)
        soc, pen = empirical_penalty(states, charges, cfg.battery, cfg.fees)
        emp_first, emp_second, n_days = daily_penalty_moments(
            pen, cfg.horizon, cfg.fees.discount_rate
        )

        # Simulated counterpart, restarted from empirically observed
        # window-start conditions so both sides face the same initial law.
        z0, b0, s0 = day_start_conditions(points, soc, n, cfg.horizon)

        def generate(p: int):
            rng = _rng(cfg, "validate", idx, 2, p)
            d = int(rng.integers(n_days))
            try:
                path = simulate_penalty_path(
                    kernel, model, cfg.battery, cfg.fees,
                    horizon=cfg.horizon, initial_state=int(z0[d]),
                    initial_soc=float(s0[d]), initial_backward=int(b0[d]), seed=rng,
                )
            except SimulationError:
                # Window starts inside a sojourn longer than any completed one;
                # restart the sojourn instead.
                path = simulate_penalty_path(
                    kernel, model, cfg.battery, cfg.fees,
                    horizon=cfg.horizon, initial_state=int(z0[d]),
                    initial_soc=float(s0[d]), initial_backward=0, seed=rng,
                )
            return path.penalty

        table = mc_moments(generate, cfg.n_paths, cfg.horizon, 2, cfg.fees)
        sim_second = table.moments[1]
        try:
            mape_first, skipped = mape_detail(emp_first, table.mean)
        except InputError:
            logger.info("limit %s: no nonzero empirical penalties; MAPE undefined", tag)
            mape_first, skipped = None, int(emp_first.size)
        try:
            mape_second, _ = mape_detail(emp_second, sim_second)
        except InputError:
            mape_second = None
        report.mape_first_moment_pct = mape_first
        report.mape_second_moment_pct = mape_second
        report.mape_skipped_zero_real = skipped

        doc = dict(
            config_hash=config_hash(cfg),
            seed=cfg.seed,
            limit_mw=cfg.limit_mw(frac),
            n_days=n_days,
            n_paths=cfg.n_paths,
            **report.to_dict(),
        )
        jpath = _artifact(cfg, f"validation_{tag}.json")
        with _atomic(jpath) as tmp:
            with open(tmp, "w") as fh:
                json.dump(doc, fh, sort_keys=True, indent=1)
                fh.write("\n")
        cpath = _artifact(cfg, f"validation_{tag}.csv")
        rows = report.csv_rows()
        with _atomic(cpath) as tmp:
            with open(tmp, "w", newline="") as fh:
                fh.write(f"# {_stamp(cfg)}\n")
                csv.writer(fh).writerows(rows)
        out.extend([jpath, cpath])
    return out


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "correct": stage_correct,
    "segment": stage_segment,
    "fit": stage_fit,
    "simulate": stage_simulate,
    "validate": stage_validate,
}


def run_stage(cfg: RunConfig, stage: str) -> list[Path]:
    if stage not in _STAGE_FUNCS:
        raise InputError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    logger.info("running stage %s -> %s", stage, cfg.out_dir)
    try:
        return _STAGE_FUNCS[stage](cfg)
    except WindBridgeError as exc:
        if str(exc).startswith("["):
            raise
        raise type(exc)(f"[{stage}] {exc}") from exc


def run_pipeline(cfg: RunConfig) -> list[Path]:
    """Run every stage in order; artifacts land in ``cfg.out_dir``."""
    artifacts: list[Path] = []
    for stage in STAGES:
        artifacts.extend(run_stage(cfg, stage))
    return artifacts
