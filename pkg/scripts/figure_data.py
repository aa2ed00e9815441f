"""Write the plot data for both presets: sample paths, verdicts and densities.

    python scripts/figure_data.py --out figure_data

Columns are gnuplot friendly, e.g.
``plot 'figure_data/example1/paths_hidden_0.csv' using 1:3 with lines``.
"""

import argparse
import os

from hidden_sir.config import override, parse_config
from hidden_sir.experiments import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figure_data")
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--density-seeds", type=int, default=20)
    args = ap.parse_args()
    for preset in ("example1", "example2"):
        base = parse_config("", preset)
        out = os.path.join(args.out, preset)
        jobs = [override(base, kind="simulate", seeds=1, horizon=args.horizon, out_dir=out),
                override(base, kind="threshold", out_dir=out)]
        if preset == "example2":
            jobs.append(override(base, kind="density", seeds=args.density_seeds,
                                 horizon=args.horizon, out_dir=out))
        for cfg in jobs:
            for f in run_experiment(cfg):
                print(f)


if __name__ == "__main__":
    main()
