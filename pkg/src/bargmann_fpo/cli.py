"""Command-line entry point: ``bargmann-fpo <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import BargmannFPOError, ConfigError
from .experiments import METHODS, PRESETS, ExperimentConfig, load_config, run_experiment

VERBS = {
    "potential": "potential",
    "phase-shift": "phase_shift",
    "poles": "poles",
    "fixed-point": "fixed_point",
    "trajectories": "trajectories",
    "compare": "compare",
}


def _numbers(n, conv=float):
    def parse(text):
        try:
            vals = tuple(conv(x) for x in text.replace(",", " ").split())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}") from None
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} numbers, got {len(vals)}")
        return vals
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bargmann-fpo",
        description="Resonance poles and phase shifts of truncated Bargmann potentials.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="INI file")
        src.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out-dir")
        p.add_argument("--grid", type=_numbers(2, int), metavar="NRE,NIM")
        p.add_argument("--region", type=_numbers(4), metavar="REMIN,REMAX,IMMIN,IMMAX")
        p.add_argument("--a", type=float, help="lattice constant")
        p.add_argument("--rcut", type=float, help="cutoff radius")
        p.add_argument("--method", help=f"comma-separated subset of {', '.join(METHODS)}; "
                                        "for trajectories: determinant or fixed_point")
        if verb == "trajectories":
            p.add_argument("--step", type=float, help="sweep step in R_cut")
    return parser


def config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else PRESETS[args.preset]
    task = VERBS[args.verb]
    overrides = {"out_dir": args.out_dir, "grid": args.grid, "region": args.region,
                 "a": args.a, "R_cut": args.rcut}
    if args.method:
        if task == "trajectories":
            overrides["trajectory_method"] = args.method
        else:
            overrides["methods"] = tuple(m.strip() for m in args.method.split(",") if m.strip())
    if getattr(args, "step", None) is not None:
        start, stop, _ = config.sweep
        overrides["sweep"] = (start, stop, args.step)
    if overrides["out_dir"] is None and args.preset:
        overrides["out_dir"] = f"out/{args.preset}"
    return config.with_overrides(**overrides, task=task)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        manifest = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BargmannFPOError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"out_dir": config.out_dir, "artifacts": manifest["artifacts"],
                      "summary": manifest["summary"]}, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
