"""Verb implementations. Each verb is a small function returning an exit code."""
from __future__ import annotations

import argparse
import logging

from .config import Config, load_config
from .paths import ResolvedPaths

LOG_FORMAT = "%(asctime)s | %(name)-14s | %(levelname)-8s | %(message)s"

_OVERRIDES = {
    "study": ("method", "operator", "operator_expression", "operator_order", "kernel", "lmax", "norm", "ladder"),
    "output": ("format",),
    "solver": ("parallel",),
}


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)


def _load(paths: ResolvedPaths, args: argparse.Namespace) -> Config:
    """Config file values with command-line flags on top."""
    cfg = load_config(paths.config_path, out_dir=paths.out_dir, required=paths.config_explicit)
    for section, keys in _OVERRIDES.items():
        target = getattr(cfg, section)
        for key in keys:
            value = getattr(args, key, None)
            if value is not None:
                setattr(target, key, value)
    if getattr(args, "out", None) is not None:
        cfg.output.path = str(args.out)
    cfg.study.__post_init__()
    cfg.solver.__post_init__()
    cfg.output.__post_init__()
    cfg.validate()
    return cfg


def info(paths: ResolvedPaths) -> int:
    import os

    import numpy
    import scipy

    from . import __version__

    print(f"spdo {__version__}")
    print(f"  home:        {paths.home if paths.home else '(SPDO_HOME not set)'}")
    print(f"  config:      {paths.config_path}")
    print(f"  out dir:     {paths.out_dir}")
    print(f"  config exists: {paths.config_path.is_file()}")
    print(f"  numpy {numpy.__version__}, scipy {scipy.__version__}")

    env_vars = ("SPDO_HOME", "SPDO_THREADS")
    set_vars = [v for v in env_vars if os.environ.get(v)]
    if set_vars:
        print("  env overrides: " + ", ".join(set_vars))

    if paths.config_path.is_file():
        try:
            cfg = Config.from_file(paths.config_path, out_dir=paths.out_dir)
            s = cfg.study
            print(f"  study: {s.method} / {s.operator} / {s.kernel}, lmax={s.lmax or 'auto'}")
            print(f"  threads: {cfg.solver.threads}")
        except Exception as e:  # noqa: BLE001  info should never crash
            print(f"  (could not load config: {e})")
    return 0


def solve(paths: ResolvedPaths, args: argparse.Namespace) -> int:
    from .analysis import ConvergenceRow, manufactured_problem, sobolev_error
    from .assembly import Problem
    from .assembly import solve as solve_problem
    from .export import write_spdo
    from .harness import shape_from_config, symbol_from_config
    from .pointsets import parse_points_spec
    from .report import emit_report

    _configure_logging(args.verbose)
    cfg = _load(paths, args)
    study = cfg.study
    symbol = symbol_from_config(study)
    shape = shape_from_config(study)
    X = parse_points_spec(args.points)
    problem = manufactured_problem(symbol)

    bundle = solve_problem(Problem(
        method=study.method, symbol=symbol, shape=shape, points=X, rhs=problem.g,
        l_max=None if study.auto_lmax else study.lmax,
        constraints=problem.constraints, tolerance=cfg.solver.tolerance, threads=cfg.solver.threads,
    ))
    err = sobolev_error(problem.u, bundle.c, shape, X, study.norm, bundle.l_max, kernel_coeffs=bundle.kernel_coeffs)

    print(f"{study.method} / {symbol.name} / {shape.name}: N={len(X)}")
    print(f"  h_X = {X.h_X:.5f}   q_X = {X.q_X:.5f}   rho_X = {X.rho_X:.3f}")
    print(f"  H^{study.norm:g} error = {err.value:.9g}   (tail <= {err.tail_estimate:.3g})")
    print(f"  condition ~ {bundle.report.condition:.3g}   min pivot = {bundle.report.min_pivot:.3g}")
    print(f"  truncation tail <= {bundle.meta.tail_bound:.3g} at l_max={bundle.l_max}")
    for (l, m), value in bundle.kernel_coeffs.items():
        print(f"  kernel part c[{l},{m}] = {value:.12g}")

    if args.out is not None:
        emit_report([ConvergenceRow(N=len(X), h_X=X.h_X, error=err.value)], args.out, cfg.output.format, s=study.norm)
    if args.save_matrix is not None:
        write_spdo(args.save_matrix, bundle.system.matrix)
        print(f"  matrix written to {args.save_matrix}")
    return 0


def study(paths: ResolvedPaths, args: argparse.Namespace) -> int:
    from .harness import run_convergence_study
    from .paths import ensure_out_dir
    from .report import emit_report

    _configure_logging(args.verbose)
    cfg = _load(paths, args)
    ensure_out_dir(paths)
    result = run_convergence_study(cfg)
    out = emit_report(
        result.rows, cfg.report_path, cfg.output.format,
        s=cfg.study.norm, predicted=result.predicted_rate, global_rate=result.global_eoc,
    )

    print(f"\n{'N':>6} {'h_X':>10} {'error':>16} {'EOC':>8}")
    for row in result.rows:
        rate = "" if row.eoc is None else f"{row.eoc:.3f}"
        print(f"{row.N:>6} {row.h_X:>10.5f} {row.error:>16.9f} {rate:>8}")
    print(f"\nExpected order of convergence : {result.predicted_rate:g}")
    if result.global_eoc is not None:
        print(f"Least-squares order           : {result.global_eoc:.3f}")
    print(f"Report: {out}")

    failed = bool(result.failures)
    for N, why in result.failures.items():
        print(f"  ✗ N={N}: {why}")
    if args.expect_rate is not None:
        lo, hi = args.expect_rate
        ok = result.global_eoc is not None and lo <= result.global_eoc <= hi
        print(f"  {'✓' if ok else '✗'} order within [{lo:g}, {hi:g}]")
        failed |= not ok
    return 1 if failed else 0


def probe(paths: ResolvedPaths, *, seed: int | None = None, verbose: bool = False) -> int:
    from .probes import run_probe_suite

    _configure_logging(verbose)
    if seed is None:
        seed = load_config(paths.config_path, out_dir=paths.out_dir, required=paths.config_explicit).study.seed
    results = run_probe_suite(seed)
    return 0 if all(r.passed for r in results) else 1
