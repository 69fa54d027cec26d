"""Self-checks for ``spdo probe``: small, fast instances of the library's invariants."""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .analysis import exact_dirichlet_solution, verify_reproducing
from .assembly import (
    Problem,
    cholesky_solve,
    collocation_matrix,
    collocation_rhs,
    galerkin_matrix,
    galerkin_rhs,
    solve,
)
from .errors import SpdoError, SpdoInputError
from .kernels import ShapeFunction, SpectralFunction, ZonalKernel, kernel_eval_series, wendland_shape
from .operators import (
    UnisolventConstraints,
    apply,
    ellipticity_scan,
    make_symbol,
    mean_value_functional,
    pair,
)
from .pointsets import fibonacci_points
from .sphcore import real_harmonics_n3

log = logging.getLogger("spdo.probes")

PROBE_TABLE = 200
PROBE_LMAX = 100


@dataclass(frozen=True)
class ProbeResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""


def _random_sphere(rng: np.random.Generator, N: int) -> np.ndarray:
    x = rng.standard_normal((N, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _within(name: str, measured: float, tolerance: float, detail: str = "") -> ProbeResult:
    return ProbeResult(name, bool(measured <= tolerance), float(measured), tolerance, detail)


# ── Individual probes ───────────────────────────────────


def probe_coefficients(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    worst = float(shape.coeffs.min())
    return ProbeResult("shape coefficients positive", worst > 0.0, worst, 0.0, f"min phi_hat = {worst:.3g}")


def probe_series(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    if shape.closed_form is None:
        return ProbeResult("series matches closed form", True, 0.0, 0.0, "no closed form; skipped")
    c = rng.uniform(-1.0, 0.95, 50)
    dev = float(np.max(np.abs(kernel_eval_series(shape, c) - shape.closed_form(c))))
    return _within("series matches closed form", dev, 2e-4)


def probe_reproducing(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    X = fibonacci_points(40)
    dev = verify_reproducing(shape, X, 20, 10, seed=int(rng.integers(1 << 31)))
    return _within("reproducing property", dev, 1e-10)


def probe_oracle(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    pts = _random_sphere(rng, 4)
    l_max = 8
    Y = real_harmonics_n3(l_max, pts)
    degree = np.repeat(np.arange(l_max + 1), 2 * np.arange(l_max + 1) + 1)
    phi = shape.coefficients(l_max)[degree]
    worst = 0.0
    for name in ("weakly_singular", "identity", "laplace_beltrami"):
        L = make_symbol(name)
        sym = L.values(l_max)[degree]
        for build, power in ((galerkin_matrix, 2), (collocation_matrix, 1)):
            oracle = (Y * (sym * phi**power)) @ Y.T
            A = build(L, shape, pts, l_max)
            worst = max(worst, float(np.max(np.abs(A - oracle)) / np.max(np.abs(oracle))))
    return _within("addition formula matches harmonics", worst, 1e-12)


def probe_spd(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    """Symmetric, Cholesky-factorable systems; positivity of phi_hat is part of the check."""
    if np.any(shape.coeffs <= 0.0):
        bad = int(np.flatnonzero(shape.coeffs <= 0.0)[0])
        return ProbeResult("systems symmetric positive definite", False, float(shape.coeffs[bad]), 0.0,
                           f"phi_hat({bad}) <= 0")
    X = fibonacci_points(40)
    L = make_symbol("weakly_singular")
    l_max = min(PROBE_LMAX, shape.l_max_table)
    worst_sym = 0.0
    try:
        for A in (galerkin_matrix(L, shape, X, l_max), collocation_matrix(L, shape, X, l_max),
                  collocation_matrix(make_symbol("identity"), shape, X, l_max)):
            worst_sym = max(worst_sym, float(np.max(np.abs(A - A.T))))
            cholesky_solve((A, np.ones(len(X))))
    except SpdoError as e:
        return ProbeResult("systems symmetric positive definite", False, math.nan, 0.0, str(e))
    return _within("systems symmetric positive definite", worst_sym, 1e-13)


def probe_kernel_matrix(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    worst = math.inf
    for _ in range(10):
        A = ZonalKernel(shape, _random_sphere(rng, 8)).interpolation_matrix()
        worst = min(worst, float(np.linalg.eigvalsh(A).min()))
    return ProbeResult("interpolation matrices positive", worst > 0.0, worst, 0.0, f"min eigenvalue {worst:.3g}")


def probe_ellipticity(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    worst = math.inf
    for name in ("weakly_singular", "hypersingular", "laplace_beltrami", "identity"):
        c1, _ = ellipticity_scan(make_symbol(name), 200)
        worst = min(worst, c1)
    return ProbeResult("built-in symbols strongly elliptic", worst > 0.0, worst, 0.0, f"smallest C1 {worst:.3g}")


def probe_benchmark_symbol(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    data = exact_dirichlet_solution(200)
    Su = apply(make_symbol("weakly_singular"), data.u)
    rel = np.abs(Su.coeffs - data.g.coeffs) / np.abs(data.g.coeffs)
    return _within("S u = g in coefficient space", float(np.max(rel)), 1e-14)


def probe_collocation_residual(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    X = fibonacci_points(40)
    L = make_symbol("weakly_singular")
    l_max = min(PROBE_LMAX, shape.l_max_table)
    g = exact_dirichlet_solution().g
    A, b = collocation_matrix(L, shape, X, l_max), collocation_rhs(g, X, l_max=l_max)
    report = cholesky_solve((A, b))
    return _within("collocation solution interpolates", float(np.linalg.norm(A @ report.c - b) / np.linalg.norm(b)), 1e-8)


def probe_galerkin_orthogonality(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    X = fibonacci_points(40)
    L = make_symbol("weakly_singular")
    l_max = min(PROBE_LMAX, shape.l_max_table)
    g = exact_dirichlet_solution().g
    A, b = galerkin_matrix(L, shape, X, l_max), galerkin_rhs(g, shape, X, l_max)
    report = cholesky_solve((A, b))
    return _within("Galerkin equations hold", float(np.max(np.abs(A @ report.c - b)) / np.linalg.norm(b)), 1e-8)


def probe_kernel_correction(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    """Laplace–Beltrami with u = Y_{1,0} + 0.7 Y_{0,0} and a mean-value constraint."""
    L = make_symbol("laplace_beltrami")
    u = SpectralFunction.from_harmonics({(1, 0): 1.0, (0, 0): 0.7})
    mu = mean_value_functional(3)
    constraints = UnisolventConstraints((mu,), (pair(mu, u),))
    X = fibonacci_points(30)
    bundle = solve(Problem("galerkin", L, shape, X, apply(L, u), min(PROBE_LMAX, shape.l_max_table), constraints))
    residual = abs(bundle.pairing(mu) - constraints.targets[0])
    return _within("kernel correction meets constraints", residual, 1e-10)


def probe_dimension_check(shape: ShapeFunction, rng: np.random.Generator) -> ProbeResult:
    try:
        cholesky_solve((np.eye(3), np.ones(4)))
    except SpdoInputError as e:
        return ProbeResult("mismatched systems rejected", True, 0.0, 0.0, str(e))
    return ProbeResult("mismatched systems rejected", False, 1.0, 0.0, "3x3 matrix accepted a 4-vector")


PROBES: tuple[Callable[[ShapeFunction, np.random.Generator], ProbeResult], ...] = (
    probe_coefficients,
    probe_series,
    probe_reproducing,
    probe_oracle,
    probe_spd,
    probe_kernel_matrix,
    probe_ellipticity,
    probe_benchmark_symbol,
    probe_collocation_residual,
    probe_galerkin_orthogonality,
    probe_kernel_correction,
    probe_dimension_check,
)


def run_probe_suite(seed: int = 0, shape: ShapeFunction | None = None, *, verbose: bool = True) -> list[ProbeResult]:
    """Run every probe; a probe that raises is recorded as failed, never re-raised."""
    shape = shape if shape is not None else wendland_shape(3, PROBE_TABLE)
    rng = np.random.default_rng(seed)
    results: list[ProbeResult] = []
    if verbose:
        print(f"Running probes (seed {seed}, shape '{shape.name}')...\n")
    for probe in PROBES:
        name = probe.__name__.removeprefix("probe_").replace("_", " ")
        try:
            result = probe(shape, rng)
        except SpdoError as e:
            result = ProbeResult(name, False, math.nan, 0.0, str(e))
        results.append(result)
        if verbose:
            mark = "✓" if result.passed else "✗"
            detail = f" ({result.detail})" if result.detail else f" ({result.measured:.3g})"
            print(f"  {mark} {result.name}{detail}")
    failed = sum(not r.passed for r in results)
    if verbose:
        print("\nAll probes passed." if not failed else f"\n{failed} probe(s) failed.")
    log.debug("Probe suite: %d/%d passed.", len(results) - failed, len(results))
    return results
