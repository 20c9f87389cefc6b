"""``bench`` command line: solver sweeps and performance profiles.

    bench run --problems DIR_OR_FILES --solvers plss-a,cg,randn:r=50 --out results.csv
    bench profile --in results.csv --metric seconds --svg profile.svg
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    SOLVERS,
    BenchmarkSpec,
    Fixed,
    FractionOfN,
    ProfileVariant,
    emit_profile_svg,
    performance_profile,
    profile_table,
    run_benchmark,
)
from .mmio import read_csv_report, write_csv_report


def _problem_paths(items: list[str]) -> list[Path]:
    paths: list[Path] = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            found = sorted(p.glob("*.mtx"))
            if not found:
                raise FileNotFoundError(f"no .mtx files in {p}")
            paths.extend(found)
        else:
            paths.append(p)
    return paths


def _split_solvers(text: str) -> list[str]:
    return [s for s in (part.strip() for part in text.split(",")) if s]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Sketch-and-project solver benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a solver sweep and write a CSV table")
    run.add_argument("--problems", nargs="+", required=True, help="Matrix Market files or directories of .mtx files")
    run.add_argument(
        "--solvers",
        default="plss-i,plss-a,cg",
        help=f"comma-separated solver names with optional ':key=value' options ({', '.join(SOLVERS)})",
    )
    run.add_argument("--tol", type=float, default=1e-4, help="relative residual tolerance")
    limit = run.add_mutually_exclusive_group()
    limit.add_argument("--maxit-frac", type=float, default=None, help="iteration limit round(c*n) (default c=1.1)")
    limit.add_argument("--maxit", type=int, default=None, help="fixed iteration limit")
    run.add_argument("--rhs", choices=("ones", "random", "file"), default="ones")
    run.add_argument("--rhs-file", default=None, help="Matrix Market vector used with --rhs file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--reps", type=int, default=1, help="timed repetitions per run (median is reported)")
    run.add_argument("--threads", type=int, default=None, help="worker threads (default BENCH_THREADS or cores)")
    run.add_argument("--out", default="-", help="output CSV path, '-' for stdout")

    prof = sub.add_parser("profile", help="performance profile from a sweep CSV")
    prof.add_argument("--in", dest="infile", required=True)
    prof.add_argument("--metric", choices=("seconds", "iterations"), default="seconds")
    prof.add_argument("--variant", choices=[v.value for v in ProfileVariant], default=ProfileVariant.MIN_OVER_ALL.value)
    prof.add_argument("--svg", default=None, help="write the profile plot here (plus a sibling .csv)")
    return parser


def _cmd_run(args) -> int:
    if args.maxit is not None:
        rule = Fixed(args.maxit)
    else:
        rule = FractionOfN(1.1 if args.maxit_frac is None else args.maxit_frac)
    spec = BenchmarkSpec(
        problems=_problem_paths(args.problems),
        solvers=_split_solvers(args.solvers),
        tol=args.tol,
        maxit_rule=rule,
        rhs_mode=args.rhs,
        rhs_file=args.rhs_file,
        seed=args.seed,
        repetitions=args.reps,
    )
    rows = run_benchmark(spec, threads=args.threads)
    if args.out == "-":
        write_csv_report(rows, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv_report(rows, fh)
    failed = sum(1 for _, _, rep in rows if not rep.converged)
    print(f"{len(rows)} runs, {len(rows) - failed} converged", file=sys.stderr)
    return 0


def _cmd_profile(args) -> int:
    with open(args.infile, "r", encoding="utf-8", newline="") as fh:
        rows = read_csv_report(fh)
    if not rows:
        raise ValueError(f"{args.infile} contains no runs")
    problems, solvers, t, failures = profile_table(rows, args.metric)
    profile = performance_profile(t, failures, args.variant)
    width = max(len(s) for s in solvers)
    print(f"{'solver':<{width}}  rho(1)  rho(max)")
    for j, s in enumerate(solvers):
        print(f"{s:<{width}}  {profile.rho(j, 1.0):6.3f}  {profile.curves[j][1][-1]:8.3f}")
    if args.svg:
        emit_profile_svg(profile, solvers, args.svg)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_profile(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"bench: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
