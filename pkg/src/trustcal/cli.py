"""Command-line interface.

Subcommands::

    trustcal simulate    --config C [--seed S] [--out DIR]
    trustcal fit         --config C --data SIM.csv [--method trust|trustpp|trustpp-tuned]
    trustcal confset     --config C --bundle B --x X.csv [--alpha A] [--beta B]
    trustcal pvalue      --config C --bundle B --x X.csv --theta T [T ...]
    trustcal tune-m      --config C --bundle B
    trustcal experiment  --config C [--replicates R] [--jobs N]
    trustcal summary     RESULTS.csv [...]
    trustcal config-schema

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import CONFIG_SCHEMA, ConfigError, METHODS, load_config

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.add_argument("--alpha", type=float, help="miscoverage level")
    p.add_argument("--beta", type=float, help="error level of the cutoff bounds")
    p.add_argument("--split", action="store_true", default=None,
                   help="fit the partition and calibrate on disjoint halves of the records")
    p.add_argument("--jobs", type=int, help="parallel workers")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trustcal", description="Calibrate confidence-set cutoffs by tree and forest partitions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate the calibration records")
    _common(p)

    p = sub.add_parser("fit", help="fit a calibrator bundle on simulated records")
    _common(p)
    p.add_argument("--data", required=True, metavar="CSV", help="simulated set written by 'simulate'")
    p.add_argument("--method", default="trustpp", choices=["trust", "trustpp", "trustpp-tuned"])

    p = sub.add_parser("confset", help="confidence set with three-way labels for observed data")
    _common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--x", required=True, metavar="CSV", help="observed data, one observation per row")

    p = sub.add_parser("pvalue", help="calibrated p-value at a parameter value")
    _common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--x", required=True, metavar="CSV")
    p.add_argument("--theta", required=True, type=float, nargs="+", help="interest parameter value(s)")

    p = sub.add_parser("tune-m", help="tune the TRUST++ neighborhood threshold M")
    _common(p)
    p.add_argument("--bundle", required=True)

    p = sub.add_parser("experiment", help="replicated coverage comparison of methods")
    _common(p)
    p.add_argument("--method", action="append", choices=list(METHODS),
                   help="method to include (repeatable; overrides the config list)")
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("summary", help="summary table of experiment results")
    p.add_argument("results", nargs="+", help="results CSV files")

    sub.add_parser("config-schema", help="print the configuration JSON schema")
    return parser


def _config(args):
    return load_config(args.config, seed=args.seed, out=args.out, alpha=args.alpha, beta=args.beta,
                       split=args.split, jobs=args.jobs,
                       methods=getattr(args, "method", None) if args.command == "experiment" else None)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "verbose", False):
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    from . import experiment as ex

    try:
        if args.command == "config-schema":
            print(json.dumps(CONFIG_SCHEMA, indent=2))
            return EXIT_OK
        if args.command == "summary":
            results = [r for path in args.results for r in ex.read_results(path)]
            sys.stdout.write(ex.format_summary(results))
            return EXIT_OK
        cfg = _config(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"trustcal: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "simulate":
            print(ex.run_simulate(cfg))
        elif args.command == "fit":
            print(ex.run_fit(cfg, args.data, args.method))
        elif args.command == "confset":
            for path in ex.run_confset(cfg, args.bundle, args.x).values():
                print(path)
        elif args.command == "pvalue":
            print(repr(ex.run_pvalue(cfg, args.bundle, args.x, args.theta)))
        elif args.command == "tune-m":
            path, tuned = ex.run_tune(cfg, args.bundle)
            for M, v in sorted(tuned.tune_table.items()):
                print(f"M={M:<5d} MAE={v:.5f}{'  <- chosen' if M == tuned.M else ''}")
            print(path)
        elif args.command == "experiment":
            results = ex.run_experiment(cfg, cfg["out"], args.replicates)
            sys.stdout.write(ex.format_summary(results))
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"trustcal {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
