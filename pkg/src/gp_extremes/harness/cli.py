"""Command-line entry point.

Subcommands ``sample``, ``experiment``, ``flatness`` and ``verify`` run a
scenario; ``report`` re-reads a finished output directory, recomputes the
replicate statistics from ``replicates.csv`` and checks them against
``summary.json``.

Settings are resolved flag > config file > default.  For the worker count
the environment variable ``GP_EXTREMES_WORKERS`` stands in for a missing
``--workers`` flag.  The exit code is 0 iff nothing failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from ..errors import GPExtremesError
from ..records import read_csv, replicate_statistics
from ..sampling import LatticeGrid
from .config import build_config, parse_config
from .runner import run_scenario

RUNNERS = ("sample", "experiment", "flatness", "verify")


def build_parser():
    parser = argparse.ArgumentParser(prog="gp-extremes", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", metavar="PATH", help="key=value config file")
        p.add_argument("--seed", type=lambda s: int(s, 0), metavar="U64", help="master seed")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--workers", type=int, metavar="N", help="worker threads")
        p.add_argument("--backend", choices=("auto", "cholesky", "fft"), help="sampler backend")
    p = sub.add_parser("report", help="summarise an output directory and check the CSV round trip")
    p.add_argument("--out", metavar="DIR", required=True)
    return parser


def resolve_config(args):
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = {"scenario": args.command, "seed": args.seed, "out": args.out,
                 "backend": args.backend}
    workers = args.workers
    if workers is None and os.environ.get("GP_EXTREMES_WORKERS"):
        workers = int(os.environ["GP_EXTREMES_WORKERS"])
    overrides["workers"] = workers
    return parse_config(text, overrides)


def _close(a, b, rel=1e-12):
    return a == b or abs(a - b) <= rel * max(abs(a), abs(b))


def report(out_dir, stream=None):
    """Print a summary of ``out_dir``; return the number of round-trip mismatches."""
    stream = stream or sys.stdout
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    print(f"{summary['name']} [{summary['scenario']}] {summary['version']}", file=stream)
    print(f"failures: {summary['failures']}  checks: {summary['checks_passed']} passed, "
          f"{summary['checks_failed']} failed", file=stream)
    for w in summary["warnings"]:
        print(f"warning [{w['stage']}/{w['operation']}]: {w['message']}", file=stream)
    stages = summary["stages"]
    if summary["scenario"] == "verify":
        for c in stages["checks"]:
            print(f"{'PASS' if c['passed'] else 'FAIL'} {c['suite']}: {c['name']}", file=stream)
    stored = stages.get("replicate_statistics")
    if stored is None:
        return 0
    table = read_csv(os.path.join(out_dir, "replicates.csv"))
    cov = None
    if table.I_t is not None and "var_M_chatterjee" in stored:
        cfg = build_config({k: (tuple(v) if isinstance(v, list) else v)
                            for k, v in summary["config"].items()})
        model = cfg.model()
        grid = LatticeGrid.from_points(cfg.schedule[-1], cfg.d, cfg.eps)
        pts = grid.points

        def cov(i, j):
            return model.eval_cov(pts[i], pts[j])
    again = replicate_statistics(table, cov)
    bad = 0
    for key, value in stored.items():
        ok = key in again and _close(float(again[key]), float(value))
        bad += not ok
        print(f"{'ok  ' if ok else 'DIFF'} {key}: stored {value!r} recomputed {again.get(key)!r}", file=stream)
    return bad


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return 1 if report(args.out) else 0
        cfg = resolve_config(args)
        summary = run_scenario(cfg)
    except (GPExtremesError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{summary.name}: wrote {len(summary.files)} files to {summary.out_dir} "
          f"in {summary.wall_time:.1f}s", file=sys.stderr)
    for w in summary.warnings:
        print(f"warning [{w['stage']}/{w['operation']}]: {w['message']}", file=sys.stderr)
    if summary.checks_passed or summary.checks_failed:
        print(f"checks: {summary.checks_passed} passed, {summary.checks_failed} failed", file=sys.stderr)
    return 0 if summary.ok else 1


if __name__ == "__main__":
    sys.exit(main())
