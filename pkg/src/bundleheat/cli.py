"""Command-line entry point: ``bundleheat <subcommand> [config] [flags]``.

Exit codes: 0 when every assertion passes, 1 when any fails, 2 on a config
error.
"""
from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError

SUBCOMMANDS = ("run", "kernel", "conservation", "domination", "localtime", "validate")


def build_parser():
    parser = argparse.ArgumentParser(prog="bundleheat", description="Monte Carlo heat semigroups on vector bundles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        if name != "validate":
            p.add_argument("config_path", nargs="?", help="experiment TOML file")
            p.add_argument("--config", dest="config_opt", help="experiment TOML file")
            p.add_argument("--out", default="out", help="directory for CSV and JSON reports")
            p.add_argument("--paths", type=int)
            p.add_argument("--dt", type=float)
            p.add_argument("--scheme", choices=("onestep-exact", "overshoot"))
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--quick", action="store_true", help="reduced path counts (10x fewer)")
        if name == "validate":
            p.add_argument("--only", type=int, nargs="+", help="run only these criterion numbers")
    return parser


def _run(args, quantity):
    path = args.config_opt or args.config_path
    if path is None:
        raise ConfigError("no config file given")
    cfg = load_config(path)
    paths = args.paths
    if args.quick:
        paths = max(cfg.ensemble.batches, (paths or cfg.ensemble.paths) // 10)
    cfg = cfg.with_overrides(paths=paths, dt=args.dt, seed=args.seed, threads=args.threads, scheme=args.scheme)
    from .experiments import run_experiment
    from .report import write_report

    report = run_experiment(cfg, quantity)
    csv_path, json_path = write_report(report, args.out)
    for a in report.assertions:
        print(f"[{'PASS' if a.passed else 'FAIL'}] {a.name}: {a.estimate:.6g} +- {a.se:.2g} "
              f"(target {a.target:.6g}, tol {a.tolerance:.2g})")
    print(f"wrote {csv_path} and {json_path}")
    return 0 if report.passed else 1


def _validate(args):
    from .acceptance import run_all
    from .oracle import self_test_table

    print(self_test_table())
    results = run_all(quick=args.quick, seed=2024 if args.seed is None else args.seed, threads=args.threads or 1,
                      select=args.only, echo=lambda line: print(line, flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _validate(args)
        return _run(args, None if args.command == "run" else args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
