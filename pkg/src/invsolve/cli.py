"""Command-line interface.

``invsolve run`` reproduces a reconstruction study and writes results.csv
(one row per noise level and seed) plus an optional per-iteration trace.
``invsolve check`` runs the lemma verification suite and prints one
PASS/FAIL line per lemma. Exit codes: 0 success, 2 validation error,
3 solver or check failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .checks import run_lemma_suite
from .experiment import (ExperimentConfig, run_experiment, write_results_csv,
                         write_trace_csv)
from .linsolve import NoConvergenceError, NotSPDError
from .regularize import DEFAULT_BL_STEP


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="invsolve",
        description="Iterative regularization of the inverse source problem "
                    "for -Laplace(y) + max(y,0) = u on the unit square")
    parser.add_argument("--version", action="version",
                        version=f"invsolve {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a reconstruction study")
    run.add_argument("--nh", type=int, default=128,
                     help="vertices per side of the mesh (default 128)")
    run.add_argument("--beta", type=float, default=0.005,
                     help="width parameter of the exact solution (default 0.005)")
    run.add_argument("--alpha0", type=float, default=1.0,
                     help="initial Tikhonov parameter (default 1.0)")
    run.add_argument("--r", type=float, default=0.5,
                     help="geometric decay rate of alpha_n (default 0.5)")
    run.add_argument("--tau", type=float, default=1.5,
                     help="discrepancy-principle factor (default 1.5)")
    run.add_argument("--method", choices=["blm", "bl"], default="blm",
                     help="Levenberg-Marquardt (blm) or Landweber (bl)")
    run.add_argument("--u0", choices=["zero", "source"], default="source",
                     help="starting guess (default source)")
    run.add_argument("--deltas", type=str, default="1e-2,1e-3,1e-4",
                     help="comma-separated noise levels")
    run.add_argument("--seed", type=str, default="42",
                     help="seed, or comma-separated seeds")
    run.add_argument("--max-iter", type=int, default=0,
                     help="iteration cap (0 = method default)")
    run.add_argument("--bl-step", type=float, default=DEFAULT_BL_STEP,
                     help="Landweber step size (default 720)")
    run.add_argument("--out", type=str, default="results.csv",
                     help="output CSV path")
    run.add_argument("--trace", type=str, default=None,
                     help="optional per-iteration trace CSV path")

    check = sub.add_parser("check", help="verify the summation and spectral "
                                         "estimates numerically")
    check.add_argument("--grid", choices=["small", "full"], default="full",
                       help="parameter grid size (default full)")
    return parser


def _cmd_run(args) -> int:
    try:
        deltas = tuple(float(tok) for tok in args.deltas.split(",") if tok)
        seeds = tuple(int(tok) for tok in args.seed.split(",") if tok)
        config = ExperimentConfig(
            nh=args.nh, beta=args.beta, alpha0=args.alpha0, r=args.r,
            tau=args.tau, method=args.method, u0=args.u0, deltas=deltas,
            seeds=seeds, max_iter=args.max_iter, bl_step=args.bl_step)
        config.validate()
    except ValueError as exc:
        print(f"invsolve: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        records, results = run_experiment(config, keep_results=True)
    except (NoConvergenceError, NotSPDError) as exc:
        print(f"invsolve: solver failure: {exc}", file=sys.stderr)
        return 3
    write_results_csv(records, args.out)
    if args.trace:
        write_trace_csv(records, results, args.trace)
    for rec in records:
        if rec.failed:
            print(f"delta={rec.delta:9.3e} seed={rec.seed:<6d} FAILED")
        else:
            print(f"delta={rec.delta:9.3e} seed={rec.seed:<6d} "
                  f"N={rec.N_delta:<6d} LR={rec.LR:6.3f} E={rec.E:9.3e} "
                  f"R={rec.R:9.3e} t={rec.cpu_seconds:7.2f}s")
    print(f"wrote {args.out}")
    return 3 if any(rec.failed for rec in records) else 0


def _cmd_check(args) -> int:
    reports = run_lemma_suite(grid=args.grid)
    failed = False
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(f"{rep.lemma_id:<16s} {status}  max_violation={rep.max_violation: .3e}  "
              f"cases={rep.cases_tested}")
        failed |= not rep.passed
    return 3 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
