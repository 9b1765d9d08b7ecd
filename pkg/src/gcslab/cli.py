"""Command-line entry point.

Subcommands: ``train <config>``, ``test <config>``, ``sweep <config>``,
``moments <constellation>``.  Configs are key=value files; ``test`` and
``sweep`` also accept a previously emitted manifest.json.  Errors exit
nonzero with a single ``gcslab: error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import runner
from .config import ConfigError, parse_kv_file
from .constellation import load, moments
from .runner import SweepJob, TrainJob


def _add_sweep_flags(parser):
    parser.add_argument("config", help="key=value sweep config, or a manifest.json")
    parser.add_argument("--constellation", action="append", default=None,
                        help="override the configured constellation list (repeatable)")
    parser.add_argument("--bps-phases", type=int, default=None, help="BPS test-phase count")
    parser.add_argument("--bps-window", type=int, default=None, help="BPS half-window W")
    parser.add_argument("--paper-scale", action="store_true",
                        help="100 runs x 1e5 symbols per grid point")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--seed", type=int, default=None, help="override base seed")
    parser.add_argument("--workers", type=int, default=None, help="parallel worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcslab",
        description="Constellation-shape learning and mutual-information benchmarking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train constellation(s) from a scenario config")
    p_train.add_argument("config")
    p_train.add_argument("--out", default=None, help="override output directory")
    p_train.add_argument("--seed", type=int, default=None, help="override training seed")
    p_train.add_argument("--epochs", type=int, default=None, help="override epoch count")

    p_test = sub.add_parser("test", help="evaluate constellations over a test grid")
    _add_sweep_flags(p_test)

    p_sweep = sub.add_parser("sweep", help="like test, plus family envelope support")
    _add_sweep_flags(p_sweep)

    p_mom = sub.add_parser("moments", help="print mu4/mu6 of a constellation file")
    p_mom.add_argument("constellation")
    return parser


def _load_sweep_job(args) -> SweepJob:
    path = Path(args.config)
    if path.suffix == ".json":
        manifest = json.loads(path.read_text(encoding="utf-8"))
        job = SweepJob.from_manifest(manifest, origin=str(path))
    else:
        job = SweepJob.from_config(parse_kv_file(path), origin=str(path))
    if args.constellation:
        job.constellation_specs = list(args.constellation)
    if args.bps_phases is not None:
        job.bps_phases = args.bps_phases
    if args.bps_window is not None:
        job.bps_window = args.bps_window
    if args.paper_scale:
        job.runs_per_point = 100
        job.symbols_per_run = 100_000
    if args.out is not None:
        job.out_dir = Path(args.out)
    if args.seed is not None:
        job.base_seed = args.seed
    if args.workers is not None:
        job.workers = args.workers
    return job


def _cmd_train(args) -> int:
    job = TrainJob.from_config(parse_kv_file(args.config), origin=args.config)
    if args.out is not None:
        job.out_dir = Path(args.out)
    if args.seed is not None:
        job.seed = args.seed
    if args.epochs is not None:
        job.epochs = args.epochs
    runner.run_training_job(job, echo=print)
    return 0


def _cmd_sweep(args, envelope_allowed: bool) -> int:
    job = _load_sweep_job(args)
    if not envelope_allowed:
        job.envelope = False
    _, csv_path, manifest_path = runner.run_sweep_job(job, echo=lambda msg: print(msg, file=sys.stderr))
    print(f"wrote {csv_path} and {manifest_path}")
    return 0


def _cmd_moments(args) -> int:
    mom = moments(load(args.constellation))
    print(f"mu4={mom.mu4!r} mu6={mom.mu6!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "test":
            return _cmd_sweep(args, envelope_allowed=False)
        if args.command == "sweep":
            return _cmd_sweep(args, envelope_allowed=True)
        return _cmd_moments(args)
    except ConfigError as exc:
        print(f"gcslab: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"gcslab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
