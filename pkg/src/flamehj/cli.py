"""Command-line entry point: ``flamehj <command> --config run.json --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, NonConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3

COMMANDS = {
    "hbar": ex.cmd_hbar,
    "alpha": ex.cmd_alpha,
    "level-curve": ex.cmd_level_curve,
    "flat-pieces": ex.cmd_flat_pieces,
    "perturb": ex.cmd_perturb,
    "front": ex.cmd_front,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flamehj", description="Effective Hamiltonians and burning velocities "
                                     "for the quadratic flame model on the 2-torus.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads (results do not depend on N)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomly sampled p lists")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    exp = sub.add_parser("experiment", parents=[common])
    exp.add_argument("kind", choices=EXPERIMENTS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fn = ex.EXPERIMENT_COMMANDS[args.kind] if args.command == "experiment" else COMMANDS[args.command]
    try:
        outputs = fn(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc} (best estimate {exc.best_estimate:.6g}, oscillation {exc.oscillation:.3g})",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    for path in outputs.write(cfg.out_dir):
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
