"""Command-line entry point: ``reflexnet simulate|calibrate|gen-reference``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .config import UINT64_MAX, ConfigError, load_config
from .io import FormatError
from .runner import run_calibrate, run_gen_reference, run_simulate


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= UINT64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reflexnet", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario YAML file")
    common.add_argument("--seed", type=_seed, help="override the config seed")
    common.add_argument("--trials", type=_positive, help="override the trial count (calibrate: the trial budget)")
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the nominal network and write its logs")
    p.add_argument("--out-dir", default="out", help="directory for spikes.csv, frequency.csv, psth.csv, report.json")

    p = sub.add_parser("calibrate", parents=[common], help="self-organize the network against a reference")
    p.add_argument("--reference", required=True, help="reference CSV (time_ms,frequency_hz)")
    p.add_argument("--out-dir", default="out", help="directory for logs, organization.jsonl and report.json")

    p = sub.add_parser("gen-reference", parents=[common], help="write the trial-averaged frequency of the network")
    p.add_argument("--out", required=True, help="reference CSV to write")
    return parser


def apply_overrides(config, mode: str, seed: int | None, trials: int | None):
    config = config.replace(mode=mode)
    if seed is not None:
        config = config.replace(seed=seed)
    if trials is not None:
        if mode == "calibrate":
            config = config.replace(calibration=dataclasses.replace(config.calibration, max_trials=trials))
        else:
            config = config.replace(stimulus=dataclasses.replace(config.stimulus, count=trials))
    return config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), args.mode, args.seed, args.trials)
        if args.mode == "simulate":
            report = run_simulate(config, args.out_dir)
        elif args.mode == "calibrate":
            report = run_calibrate(config, args.reference, args.out_dir)
        else:
            report = run_gen_reference(config, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = report.to_dict()
    summary.pop("errors")
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
