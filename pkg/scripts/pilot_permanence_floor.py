"""Pilot run for the permanence floor recorded in the presets.

Simulates the hidden system of a preset on seeds disjoint from the
acceptance seeds and reports the smallest late-half time average of I.
The recorded floor should sit well below that minimum.

    python scripts/pilot_permanence_floor.py --preset example2 --seeds 20
"""

import argparse

import numpy as np

from hidden_sir.config import override, parse_config
from hidden_sir.experiments import run_ensemble

PILOT_BASE_SEED = 10_000


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="example2")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--horizon", type=float, default=500.0)
    args = ap.parse_args()
    cfg = override(parse_config("", args.preset), seeds=args.seeds, base_seed=PILOT_BASE_SEED,
                   horizon=args.horizon)
    path = run_ensemble(cfg, ("hidden",)).hidden
    late = path.times >= 0.5 * path.times[-1]
    means = path.component("I")[late].mean(axis=0)
    print(f"preset={args.preset} seeds={args.seeds} horizon={args.horizon:g}")
    print(f"late-half I mean: min={means.min():.4g} median={np.median(means):.4g} max={means.max():.4g}")
    print(f"recorded floor: {cfg.permanence_floor:g}")


if __name__ == "__main__":
    main()
