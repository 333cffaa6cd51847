"""Command line: ``mildhjb run|validate|list-fixtures``."""

import argparse
import os
import sys
import time

from . import __version__, fixtures, jsonio
from .config import load_config
from .errors import ConfigurationError, MildHJBError
from .experiments import run_experiment

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3


def _overrides(args):
    out = {}
    if getattr(args, "seed", None) is not None:
        out[("mc", "seed")] = args.seed
    if getattr(args, "replicas", None) is not None:
        out[("mc", "replicas")] = args.replicas
    return out


def cmd_validate(args):
    cfg = load_config(args.config, _overrides(args))
    if not args.quiet:
        print(f"ok: kind={cfg.kind} N={cfg.N} M={cfg.grid.M} replicas={cfg.mc.replicas} seed={cfg.mc.seed}")
        print(f"config hash {cfg.hash}")
    return EXIT_OK


def cmd_run(args):
    cfg = load_config(args.config, _overrides(args))
    out_dir = args.out or cfg.output
    started = time.perf_counter()
    outcome = run_experiment(cfg, out_dir)
    duration = time.perf_counter() - started
    checks = [c.to_record() for c in outcome.checks]
    results = {"kind": cfg.kind, "config_hash": cfg.hash, "checks": checks, "results": outcome.results}
    jsonio.dump(results, os.path.join(out_dir, "results.json"))
    manifest = {
        "config_hash": cfg.hash,
        "version": __version__,
        "kind": cfg.kind,
        "passed": outcome.passed,
        "checks": checks,
        "artifacts": ["results.json"] + outcome.artifacts,
        "duration_seconds": duration,
    }
    jsonio.dump(manifest, os.path.join(out_dir, "manifest.json"))
    if not args.quiet:
        for c in outcome.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
        print(f"{sum(c.passed for c in outcome.checks)}/{len(outcome.checks)} checks passed "
              f"in {duration:.1f}s; artifacts in {out_dir}")
    return EXIT_OK if outcome.passed else EXIT_FAILED


def cmd_list(args):
    print(fixtures.describe())
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mildhjb", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("run", cmd_run, "run an experiment config"),
                            ("validate", cmd_validate, "validate a config without running it")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--out", help="output directory (overrides [experiment] output)")
        p.add_argument("--seed", type=int, help="master seed (overrides [mc] seed)")
        p.add_argument("--replicas", type=int, help="Monte Carlo replicas (overrides [mc] replicas)")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(func=fn)
    p = sub.add_parser("list-fixtures", help="list built-in problems, costs and policies")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MildHJBError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
