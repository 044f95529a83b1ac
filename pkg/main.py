#!/usr/bin/env python3
"""CLI for testing homogeneity of normal means against monotone alternatives."""

import argparse
import sys

from src.ordmeans.logging_config import configure_logging

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from e
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _sigma2(text: str) -> float | str:
    return "pooled" if text.strip().lower() == "pooled" else _positive_float(text)


def _ratios(text: str) -> tuple[float, ...] | str:
    if text.strip().lower() == "sample":
        return "sample"
    return tuple(_positive_float(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    from src.ordmeans.config import BOOTSTRAP_WORKERS, DEFAULT_MAX_ITER, DEFAULT_REPLICATES, DEFAULT_SEED, DEFAULT_TOL

    parser = argparse.ArgumentParser(description="Likelihood-ratio tests of equal means against ordered means")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Fit, test and bootstrap a level,value or level,n,mean,var CSV")
    run_parser.add_argument("input", help="Input CSV (long: level,value; summary: level,n,mean,var)")
    run_parser.add_argument(
        "--scenario", "-s", required=True, choices=["known-ratio", "unknown", "ordered"],
        help="Variance regime",
    )
    run_parser.add_argument("--sigma2", type=_sigma2, help="Known common variance, or 'pooled' (known-ratio only)")
    run_parser.add_argument("--ratios", type=_ratios, help="Comma-separated variance ratios c_i, or 'sample'")
    run_parser.add_argument("--statistic", default="auto", choices=["auto", "chibar", "ebar", "lrt"])
    run_parser.add_argument(
        "--bootstrap", "-b", default="parametric", choices=["parametric", "nonparametric", "both", "none"],
    )
    run_parser.add_argument("--replicates", "-M", type=int, default=DEFAULT_REPLICATES)
    run_parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    run_parser.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    run_parser.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    run_parser.add_argument("--solver", default="aim", choices=["aim", "two-step"])
    run_parser.add_argument("--direction", default="inc", choices=["inc", "dec"], help="Order of the means under H1")
    run_parser.add_argument(
        "--variance-direction", default="dec", choices=["inc", "dec"],
        help="Order of the variances (ordered scenario)",
    )
    run_parser.add_argument(
        "--generation", default="sufficient", choices=["sufficient", "raw"],
        help="Parametric replicates from sufficient statistics or raw draws",
    )
    run_parser.add_argument("--workers", "-j", type=int, default=BOOTSTRAP_WORKERS)
    run_parser.add_argument("--format", default="json", choices=["json", "text"])
    run_parser.add_argument("-o", "--output", help="Report file (default: stdout)")
    run_parser.add_argument("--dump-replicates", help="Write bootstrap replicate values, one per line")
    run_parser.add_argument("--strict", action="store_true", help="Exit 3 when a fit does not converge")

    group_parser = subparsers.add_parser("group", help="Group cell,count,value records into level,value")
    group_parser.add_argument("input", help="Input CSV with columns cell,count,value")
    group_parser.add_argument(
        "--cap", "--max-level", dest="cap", type=int, help="Merge counts above this value into the top level"
    )
    group_parser.add_argument("-o", "--output", help="Output CSV (default: stdout)")
    return parser


def _run(args: argparse.Namespace) -> int:
    from src.ordmeans.ingest import read_table
    from src.ordmeans.report import RunOptions, analyze, format_report, write_report

    table = read_table(args.input)
    options = RunOptions(
        scenario=args.scenario,
        sigma2=args.sigma2,
        ratios=args.ratios,
        statistic=args.statistic,
        bootstrap=args.bootstrap,
        replicates=args.replicates,
        seed=args.seed,
        tol=args.tol,
        max_iter=args.max_iter,
        solver=args.solver,
        mean_order=args.direction,
        variance_order=args.variance_direction,
        workers=args.workers,
        generation=args.generation,
        strict=args.strict,
        dump_replicates=args.dump_replicates,
    )
    report = analyze(table, options)
    if args.output:
        write_report(report, args.output, args.format)
        print(f"Saved report to {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(format_report(report, args.format))
    if options.strict and not report["converged"]:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _group(args: argparse.Namespace) -> int:
    from src.ordmeans.ingest import group_cells, read_cells, write_long

    frame = group_cells(read_cells(args.input), cap=args.cap)
    text = write_long(frame, args.output)
    if args.output:
        print(f"Saved {len(frame)} rows to {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)

    from src.ordmeans.errors import DegenerateVariance, InvalidInput

    try:
        if args.command == "run":
            return _run(args)
        if args.command == "group":
            return _group(args)
    except (InvalidInput, DegenerateVariance) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return 1


if __name__ == "__main__":
    sys.exit(main())
