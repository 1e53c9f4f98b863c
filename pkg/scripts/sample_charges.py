#!/usr/bin/env python3
"""Dump real and simulated charge bridges for one segment class, side by side.

Useful for eyeballing whether the fitted triangle-plus-bridge model reproduces
the shapes seen in the data.  Output: <out>/real_###.csv and sim_###.csv in
the ``k,value`` layout.
"""

import argparse
from pathlib import Path

import numpy as np

from windbridge.bridge import ChargeBridge, embed_bridge, write_bridge_csv
from windbridge.pipeline import build_model_doc, charge_model_from_doc
from windbridge.power import DEFAULT_TURBINE, PowerSeries, RampPolicy, apply_ramp_limit, generate_synthetic_wind, wind_to_power
from windbridge.segmentation import extract_segments


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("charge_gallery"))
    ap.add_argument("--hours", type=int, default=30_000)
    ap.add_argument("--limit", type=float, default=0.02, help="ramp limit in MW per hour")
    ap.add_argument("--state", type=int, default=-1, choices=[-1, 1])
    ap.add_argument("--sojourn", type=int, default=5)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    speeds = generate_synthetic_wind(args.hours, 2.0, 8.0, 0.9, seed=args.seed)
    series = apply_ramp_limit(
        PowerSeries(generated=wind_to_power(speeds, DEFAULT_TURBINE)),
        RampPolicy(limit=args.limit),
        capacity=DEFAULT_TURBINE.rated_capacity,
    )
    _, segments = extract_segments(series)
    doc = build_model_doc(segments, args.limit, DEFAULT_TURBINE.rated_capacity)
    model = charge_model_from_doc(doc)

    matches = [
        s for s in segments
        if not s.censored and s.i == args.state and s.x == args.sojourn
    ]
    if not matches:
        raise SystemExit(f"no segments with i={args.state}, x={args.sojourn}; try another class")
    args.out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    js = sorted({s.j for s in matches})
    for n in range(min(args.count, len(matches))):
        seg = matches[n]
        write_bridge_csv(args.out / f"real_{n:03d}.csv", embed_bridge(seg))
        c = model.charge_path(args.state, js[n % len(js)], args.sojourn, rng)
        sim = ChargeBridge(values=c, i=args.state, j=None, x=args.sojourn)
        write_bridge_csv(args.out / f"sim_{n:03d}.csv", sim)
    print(f"wrote {min(args.count, len(matches))} real/sim bridge pairs to {args.out}/ "
          f"({len(matches)} real segments available for this class)")


if __name__ == "__main__":
    main()
