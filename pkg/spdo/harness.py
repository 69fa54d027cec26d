"""Convergence studies over a ladder of point sets."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .analysis import (
    ConvergenceRow,
    ManufacturedProblem,
    eoc,
    global_eoc,
    manufactured_problem,
    predicted_rate,
    sobolev_error,
)
from .assembly import Problem, solve
from .config import STUDY_N, Config, StudySection
from .errors import SpdoError, SpdoInputError, SpdoNumericalError
from .kernels import ShapeFunction, wendland_shape
from .operators import SpectralSymbol, make_symbol, theory_conditions
from .pointsets import PointSet, fibonacci_points, load_points

log = logging.getLogger("spdo.harness")


@dataclass(frozen=True)
class StudyResult:
    rows: list[ConvergenceRow]
    global_eoc: float | None
    predicted_rate: float
    failures: dict[int, str] = field(default_factory=dict)


def symbol_from_config(study: StudySection) -> SpectralSymbol:
    if study.operator == "custom":
        return make_symbol("custom", STUDY_N, order=study.operator_order, fn=study.operator_expression)
    return make_symbol(study.operator, STUDY_N)


def shape_from_config(study: StudySection) -> ShapeFunction:
    return wendland_shape(STUDY_N, study.table_size, variant=study.kernel)


def points_for(study: StudySection, N: int) -> PointSet:
    """Fibonacci lattice of size N, or ``file:PATH`` with ``{N}`` expanded."""
    if study.points == "fibonacci":
        return fibonacci_points(N)
    if study.points.startswith("file:"):
        X = load_points(study.points[len("file:"):].format(N=N))
        if len(X) != N:
            log.warning("Point file for N=%d holds %d points.", N, len(X))
        return X
    raise SpdoInputError(f"unknown point source '{study.points}'")


@dataclass(frozen=True, eq=False)
class _Study:
    config: Config
    symbol: SpectralSymbol
    shape: ShapeFunction
    problem: ManufacturedProblem
    threads: int

    def row(self, N: int) -> ConvergenceRow:
        study, solver = self.config.study, self.config.solver
        X = points_for(study, N)
        bundle = solve(Problem(
            method=study.method,
            symbol=self.symbol,
            shape=self.shape,
            points=X,
            rhs=self.problem.g,
            l_max=None if study.auto_lmax else study.lmax,
            constraints=self.problem.constraints,
            tolerance=solver.tolerance,
            threads=self.threads,
        ))
        report = sobolev_error(
            self.problem.u, bundle.c, self.shape, X, study.norm, bundle.l_max, kernel_coeffs=bundle.kernel_coeffs,
        )
        log.info(
            "N=%d  h_X=%.5f  ||e||_%g=%.9g  (cond %.3g, min pivot %.3g)",
            len(X), X.h_X, study.norm, report.value, bundle.report.condition, bundle.report.min_pivot,
        )
        return ConvergenceRow(N=len(X), h_X=X.h_X, error=report.value)


def run_convergence_study(config: Config) -> StudyResult:
    """Generate points, solve, and measure the error for every ladder entry.

    A numerical failure aborts its row only; the rest of the ladder still runs.
    """
    config.validate()
    study, solver = config.study, config.solver
    symbol = symbol_from_config(study)
    shape = shape_from_config(study)
    conditions = theory_conditions(symbol, shape)
    if not getattr(conditions, study.method):
        log.warning(
            "Theory does not cover %s for '%s' with tau=%g; rates may differ from %g.",
            study.method, symbol.name, shape.tau, predicted_rate(shape, study.norm),
        )

    runner = _Study(
        config=config,
        symbol=symbol,
        shape=shape,
        problem=manufactured_problem(symbol),
        threads=1 if solver.parallel else solver.threads,
    )

    def attempt(N: int) -> ConvergenceRow | str:
        try:
            return runner.row(N)
        except SpdoNumericalError as e:
            log.error("N=%d aborted: %s", N, e)
            return str(e)

    if solver.parallel and solver.threads > 1:
        with ThreadPoolExecutor(max_workers=solver.threads) as pool:
            outcomes = list(pool.map(attempt, study.ladder))
    else:
        outcomes = [attempt(N) for N in study.ladder]

    done = [o for o in outcomes if isinstance(o, ConvergenceRow)]
    failures = {N: o for N, o in zip(study.ladder, outcomes) if isinstance(o, str)}

    rows, rate = done, None
    if len(done) >= 2:
        try:
            rows = eoc(done)
            rate = global_eoc(rows)
        except SpdoError as e:
            log.warning("Orders not computed: %s", e)
    return StudyResult(rows=rows, global_eoc=rate, predicted_rate=predicted_rate(shape, study.norm), failures=failures)
