"""Command-line entry point for spdo.

Verbs:
- solve   -> one Galerkin or collocation solve with its error report.
- study   -> the convergence study over a ladder of point sets.
- probe   -> self-checks of the library's invariants.
- info    -> print resolved paths, versions, and thread cap.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import SpdoError, SpdoInputError
from .paths import ResolvedPaths, resolve_paths


def _rate_band(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        band = (float(lo), float(hi))
    except ValueError:
        band = None
    if not sep or band is None or band[0] > band[1]:
        raise argparse.ArgumentTypeError(f"expected LO:HI with LO <= HI, got {text!r}")
    return band


def _add_study_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("galerkin", "collocation"), default=None)
    p.add_argument("--operator", default=None, help="weakly-singular, hypersingular, laplace-beltrami, identity, custom")
    p.add_argument("--expression", default=None, dest="operator_expression",
                   help="custom symbol as an expression in l, e.g. 'l*(l+1)/(2*l+1)'")
    p.add_argument("--order", type=float, default=None, dest="operator_order", help="order 2*alpha of a custom symbol")
    p.add_argument("--kernel", default=None, help="wendland or wendland-c2")
    p.add_argument("--lmax", type=int, default=None, help="series truncation; 0 chooses it from solver.tolerance")
    p.add_argument("--norm", type=float, default=None, help="Sobolev index s of the error norm")
    p.add_argument("--format", choices=("csv", "markdown"), default=None)
    p.add_argument("--out", type=Path, default=None, help="report file (default: <out-dir>/<method>.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdo",
        description="Galerkin and collocation solvers for pseudodifferential equations on the sphere.",
    )
    parser.add_argument("--version", action="version", version=f"spdo {__version__}")
    parser.add_argument(
        "--config", type=Path, default=None,
        help="path to a study TOML file (default: $SPDO_HOME/study.toml or ./spdo.toml)",
    )
    parser.add_argument(
        "--out-dir", type=Path, default=None, dest="out_dir",
        help="directory for reports (default: $SPDO_HOME/results or ./results)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="verb")

    solve_p = sub.add_parser("solve", help="solve the benchmark problem on one point set")
    _add_study_overrides(solve_p)
    solve_p.add_argument("--points", default="fibonacci:101", help="fibonacci:N or file:PATH")
    solve_p.add_argument("--save-matrix", type=Path, default=None, dest="save_matrix",
                         help="write the system matrix as an SPDO binary file")

    study_p = sub.add_parser("study", help="run the convergence study over the configured ladder")
    _add_study_overrides(study_p)
    study_p.add_argument("--ladder", type=int, nargs="+", default=None, help="point counts, increasing")
    study_p.add_argument("--parallel", action="store_true", default=None, help="run ladder entries concurrently")
    study_p.add_argument("--expect-rate", type=_rate_band, default=None, dest="expect_rate",
                         help="fail unless the least-squares order lies in LO:HI")

    probe_p = sub.add_parser("probe", help="check the library's invariants on small problems")
    probe_p.add_argument("--seed", type=int, default=None, help="random seed (default: study.seed from the config)")

    sub.add_parser("info", help="print resolved paths and versions")
    return parser


def dispatch(args: argparse.Namespace, paths: ResolvedPaths) -> int:
    """Route a parsed Namespace to its verb handler. Returns process exit code."""
    if args.verb == "solve":
        from .verbs import solve as solve_verb
        return solve_verb(paths, args)
    if args.verb == "study":
        from .verbs import study as study_verb
        return study_verb(paths, args)
    if args.verb == "probe":
        from .verbs import probe as probe_verb
        return probe_verb(paths, seed=args.seed, verbose=args.verbose)
    if args.verb == "info":
        from .verbs import info as info_verb
        return info_verb(paths)
    raise SpdoInputError("No verb given. Try 'spdo study', 'spdo solve', 'spdo probe' or 'spdo info'.")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    paths = resolve_paths(args.config, args.out_dir)
    try:
        return dispatch(args, paths)
    except SpdoError as e:
        prefix = "\033[31merror:\033[0m" if sys.stderr.isatty() else "error:"
        print(f"{prefix} {e}", file=sys.stderr)
        return 1
