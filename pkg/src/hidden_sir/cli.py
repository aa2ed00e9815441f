"""``hidden-sir <kind>`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import KINDS, PRESETS, load_config, override, parse_config
from .errors import ConfigError, NumericalError
from .experiments import run_experiment

log = logging.getLogger("hidden_sir")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hidden-sir", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="YAML experiment document")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out", help="output directory")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--base-seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config is None and args.preset is None:
            raise ConfigError("--config", "give a config file or a preset")
        cfg = load_config(args.config, args.preset) if args.config else parse_config("", args.preset)
        cfg = override(cfg, kind=args.kind, out_dir=args.out, seeds=args.seeds,
                       base_seed=args.base_seed, dt=args.dt, horizon=args.horizon)
        log.info("running %s (config %s)", cfg.kind, cfg.hash[:12])
        files = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"config error: out_dir: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
