"""Command-line entry point: ``mvpure run|sweep|validate|demo``."""
import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..errors import MvpureError
from ..filters import FilterKind
from . import config as cfgmod
from . import report
from .experiment import run_experiment

log = logging.getLogger("mvpure")

SWEEPABLE = ("sinr_db", "sbnr_db", "smnr_db")


def _csv_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}")


def _csv_kinds(text):
    names = [v.strip().upper() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in FilterKind.__members__]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown filter kind(s): {', '.join(bad) or text!r}")
    return names


def _add_common(p, out_default):
    p.add_argument("--config", type=Path, help="JSON config (default: shipped default)")
    p.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--filters", type=_csv_kinds, help="comma-separated roster override")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvpure", description="Reduced-rank spatial filter benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured study")
    _add_common(p, "mvpure-out")

    p = sub.add_parser("sweep", help="run the study over a list of SNR values")
    _add_common(p, "mvpure-sweep")
    p.add_argument("--param", choices=SWEEPABLE, required=True)
    p.add_argument("--values", type=_csv_floats, required=True)

    p = sub.add_parser("validate", help="schema-check a config and exit")
    p.add_argument("--config", type=Path)

    p = sub.add_parser("demo", help="small built-in study")
    _add_common(p, "mvpure-demo")
    return parser


def _load(args, default="default"):
    if args.config is None:
        return cfgmod.shipped_config(default)
    return cfgmod.load_config(args.config)


def _execute(cfg, args):
    cfg = cfg.override(master_seed=args.seed, filter_roster=args.filters)
    if args.jobs < 1:
        raise MvpureError("--jobs must be at least 1")
    t0 = time.perf_counter()
    results = run_experiment(cfg, jobs=args.jobs)
    table = report.write_all(args.out, cfg, results)
    print(report.format_table(table))
    print(f"\n{len(results)} run(s) in {time.perf_counter() - t0:.1f} s; "
          f"results written to {args.out}/")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = _load(args)
            print(json.dumps(cfg.resolved(), indent=2, sort_keys=True))
            print("config OK", file=sys.stderr)
            return 0
        if args.command == "demo":
            return _execute(_load(args, "demo"), args)
        cfg = _load(args)
        if args.command == "sweep":
            cfg = cfg.override(**{args.param: args.values})
        return _execute(cfg, args)
    except (MvpureError, OSError) as exc:
        print(f"mvpure: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
