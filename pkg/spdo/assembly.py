"""Galerkin and collocation systems for L u = g with SRBF trial spaces.

Both matrices are zonal: entry (i, j) is sum_l w_l P_l(n; x_i . x_j) with

    Galerkin     w_l = N(n, l) / omega_n * L_hat(l) * phi_hat(l)^2
    collocation  w_l = N(n, l) / omega_n * L_hat(l) * phi_hat(l)

so assembly never needs explicit harmonics.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
from scipy.linalg import cho_solve, cholesky, get_lapack_funcs, solve_triangular

from .errors import SpdoInputError, SpdoNotPositiveDefiniteError, SpdoTruncationError
from .kernels import ShapeFunction, SpectralFunction
from .operators import (
    Functional,
    PointEvaluation,
    SpectralSymbol,
    UnisolventConstraints,
    functional_on_harmonics,
    theory_conditions,
)
from .pointsets import PointSet
from .sphcore import harmonic_basis, harmonic_dims, legendre_series, real_harmonics_n3, sphere_area

log = logging.getLogger("spdo.assembly")

GALERKIN = "galerkin"
COLLOCATION = "collocation"
METHODS = (GALERKIN, COLLOCATION)
POWER = {GALERKIN: 2, COLLOCATION: 1}
CHUNK = 20_000
RESIDUAL_TOL = 1e-10
INCONSISTENCY_TOL = 1e-12
DEFAULT_TOLERANCE = 1e-4

Rhs = Union[SpectralFunction, Callable[[np.ndarray], np.ndarray]]


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise SpdoInputError(f"unknown method '{method}'. Choose from: {', '.join(METHODS)}")


def _points(X) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(X, "points", X), dtype=float))


def entry_weights(method: str, L: SpectralSymbol, shape: ShapeFunction, l_max: int) -> np.ndarray:
    """w_l for l = 0..l_max; zero on K(L)."""
    _check_method(method)
    if L.n != shape.n:
        raise SpdoInputError(f"symbol lives on n={L.n}, shape on n={shape.n}")
    symbol = L.values(l_max)
    if not np.all(np.isfinite(symbol)):
        raise SpdoInputError(f"symbol '{L.name}' is not finite on 0..{l_max}")
    phi = shape.coefficients(l_max)
    return harmonic_dims(L.n, l_max) / sphere_area(L.n) * symbol * phi ** POWER[method]


# ── Matrices ────────────────────────────────────────────


def zonal_matrix(points: np.ndarray, weights: np.ndarray, *, threads: int = 1) -> np.ndarray:
    """[sum_l w_l P_l(n; x_i . x_j)] from the upper triangle, mirrored.

    Every entry runs its own recurrence in increasing l, so the result does
    not depend on chunking or thread count.
    """
    N, n = points.shape
    iu, ju = np.triu_indices(N)
    cosines = np.clip(np.einsum("ij,ij->i", points[iu], points[ju]), -1.0, 1.0)
    cosines[iu == ju] = 1.0
    chunks = [slice(k, min(k + CHUNK, cosines.size)) for k in range(0, cosines.size, CHUNK)]
    values = np.empty_like(cosines)

    def work(sl: slice) -> None:
        values[sl] = legendre_series(n, weights, cosines[sl])

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    else:
        for sl in chunks:
            work(sl)

    A = np.empty((N, N))
    A[iu, ju] = values
    A[ju, iu] = values
    return A


def galerkin_matrix(L: SpectralSymbol, shape: ShapeFunction, X, l_max: int, *, threads: int = 1) -> np.ndarray:
    """A_ij = a(Phi_i, Phi_j)."""
    return zonal_matrix(_points(X), entry_weights(GALERKIN, L, shape, l_max), threads=threads)


def collocation_matrix(L: SpectralSymbol, shape: ShapeFunction, X, l_max: int, *, threads: int = 1) -> np.ndarray:
    """A_ij = (L Phi_i)(x_j)."""
    return zonal_matrix(_points(X), entry_weights(COLLOCATION, L, shape, l_max), threads=threads)


def symbol_growth(L: SpectralSymbol, l_from: int) -> float:
    """sup over l > l_from of |L_hat(l)| / (l+1)^(2 alpha), sampled densely then geometrically out to 1e12."""
    near = np.arange(l_from + 1, l_from + 1001, dtype=float)
    far = np.geomspace(l_from + 1001, 1e12, 200)
    ls = np.concatenate([near, far])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sym = np.abs(np.asarray(L.fn(ls), dtype=float) * np.ones_like(ls))
    if not np.all(np.isfinite(sym)):
        raise SpdoTruncationError(f"symbol '{L.name}' is not finite beyond l={l_from}")
    return float(np.max(sym / (ls + 1.0) ** L.order))


def truncation_bound(L: SpectralSymbol, shape: ShapeFunction, l_max: int, *, method: str = GALERKIN) -> float:
    """Upper bound on sum_{l > l_max} N(n,l)/omega_n |L_hat(l)| phi_hat(l)^p.

    Uses N(n, l) <= 2 (l+1)^(n-2), |L_hat(l)| <= C2 (l+1)^(2 alpha) for l > l_max and
    phi_hat(l) <= c2 (l+1)^(-2 tau), then compares the sum with an integral.
    """
    _check_method(method)
    p = POWER[method]
    exponent = L.n - 2 + L.order - 2 * p * shape.tau
    if exponent >= -1.0:
        raise SpdoTruncationError(
            f"{method} series for '{L.name}' with '{shape.name}' does not converge absolutely "
            f"(exponent {exponent:g} >= -1)"
        )
    C2 = symbol_growth(L, l_max)
    top = shape.l_max_table
    lt = np.arange(top // 2, top + 1, dtype=float)
    c2 = float(np.max(shape.coeffs[top // 2 :] * (lt + 1.0) ** (2.0 * shape.tau)))
    return 2.0 / sphere_area(L.n) * C2 * c2**p * (l_max + 1.0) ** (exponent + 1.0) / (-exponent - 1.0)


def select_lmax(
    method: str,
    L: SpectralSymbol,
    shape: ShapeFunction,
    rel_tol: float,
    *,
    cap: int | None = None,
) -> int:
    """Smallest l_max whose tail bound is at most ``rel_tol`` x the diagonal entry sum_l w_l.

    Falls back to ``cap`` (the shape table size by default) with a warning when
    no l_max up to it is enough or the tail diverges.
    """
    _check_method(method)
    cap = shape.l_max_table if cap is None else min(int(cap), shape.l_max_table)
    lo = max([1, *L.kernel_set])
    if lo >= cap:
        return cap
    diagonal = np.abs(np.cumsum(entry_weights(method, L, shape, cap)))

    def fits(l_max: int) -> bool:
        scale = float(diagonal[l_max]) or 1.0
        return truncation_bound(L, shape, l_max, method=method) <= rel_tol * scale

    try:
        if not fits(cap):
            log.warning(
                "%s tail for '%s' stays above %g x diagonal up to l_max=%d; using %d.",
                method, L.name, rel_tol, cap, cap,
            )
            return cap
    except SpdoTruncationError as exc:
        log.warning("%s; using l_max=%d.", exc, cap)
        return cap
    hi = cap
    while lo < hi:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid + 1
    log.debug("Selected l_max=%d for %s '%s' with '%s' (tol %g).", lo, method, L.name, shape.name, rel_tol)
    return lo


# ── Right-hand sides ────────────────────────────────────


def _admissible(g: SpectralFunction, l_max: int, kernel_set: frozenset[int]) -> SpectralFunction:
    """g truncated at l_max with its components on K(L) removed (warning if they were not negligible)."""
    g = g.truncated(l_max)
    if not kernel_set:
        return g
    energy = g.degree_energy()
    mask = np.ones(l_max + 1)
    bad = [l for l in kernel_set if l <= l_max]
    mask[bad] = 0.0
    on_kernel = math.sqrt(float(energy[bad].sum())) if bad else 0.0
    if on_kernel > INCONSISTENCY_TOL * max(math.sqrt(float(energy.sum())), 1e-300):
        log.warning(
            "Right-hand side has a component of size %.3g on ker L (degrees %s); projecting it out.",
            on_kernel, sorted(bad),
        )
    return g.scaled_by_degree(mask)


def galerkin_rhs(
    g: SpectralFunction, shape: ShapeFunction, X, l_max: int, *, kernel_set: frozenset[int] = frozenset()
) -> np.ndarray:
    """<g, Phi_i> = sum_{l,m} g_hat[l,m] phi_hat(l) Y_{l,m}(x_i)."""
    if not isinstance(g, SpectralFunction):
        raise SpdoInputError("Galerkin right-hand sides must be spectral (general or zonal) functions")
    smoothed = _admissible(g, l_max, kernel_set).scaled_by_degree(shape.coefficients(l_max))
    return np.atleast_1d(smoothed.evaluate(_points(X)))


def collocation_rhs(g: Rhs, X, *, l_max: int | None = None, kernel_set: frozenset[int] = frozenset()) -> np.ndarray:
    """g(x_j); spectral data are truncated at l_max and cleared on K(L) first."""
    pts = _points(X)
    if isinstance(g, SpectralFunction):
        if l_max is not None:
            g = _admissible(g, l_max, kernel_set)
        return np.atleast_1d(g.evaluate(pts))
    return np.asarray(g(pts), dtype=float).reshape(pts.shape[0])


# ── Systems ─────────────────────────────────────────────


@dataclass(frozen=True)
class SystemMeta:
    method: str
    symbol: str
    shape: str
    l_max: int
    tail_bound: float


@dataclass(frozen=True, eq=False)
class DenseSystem:
    matrix: np.ndarray
    rhs: np.ndarray
    meta: SystemMeta

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def symmetry_defect(self) -> float:
        """max |A - A^T| / max |A|."""
        scale = float(np.max(np.abs(self.matrix))) or 1.0
        return float(np.max(np.abs(self.matrix - self.matrix.T))) / scale


def build_system(
    method: str,
    L: SpectralSymbol,
    shape: ShapeFunction,
    X,
    g: Rhs,
    l_max: int,
    *,
    tolerance: float | None = None,
    threads: int = 1,
) -> DenseSystem:
    """Matrix, right-hand side, and truncation record for one method.

    ``tolerance`` bounds the tail relative to the largest diagonal entry;
    without it a divergent tail is recorded as inf and only logged.
    """
    _check_method(method)
    if method == GALERKIN:
        matrix = galerkin_matrix(L, shape, X, l_max, threads=threads)
        rhs = galerkin_rhs(g, shape, X, l_max, kernel_set=L.kernel_set)
    else:
        matrix = collocation_matrix(L, shape, X, l_max, threads=threads)
        rhs = collocation_rhs(g, X, l_max=l_max, kernel_set=L.kernel_set)

    try:
        tail = truncation_bound(L, shape, l_max, method=method)
    except SpdoTruncationError:
        if tolerance is not None:
            raise
        log.warning("%s tail for '%s' diverges; entries are partial sums to l=%d.", method, L.name, l_max)
        tail = math.inf
    scale = float(np.max(np.abs(np.diag(matrix)))) or 1.0
    if tolerance is not None and tail / scale > tolerance:
        raise SpdoTruncationError(
            f"truncation tail {tail:.3g} at l_max={l_max} exceeds {tolerance:g} x largest diagonal ({scale:.3g}); "
            "raise lmax or the shape table size"
        )
    log.debug("Built %s system: N=%d, l_max=%d, tail<=%.3g.", method, matrix.shape[0], l_max, tail)
    meta = SystemMeta(method=method, symbol=L.name, shape=shape.name, l_max=l_max, tail_bound=tail)
    return DenseSystem(matrix=matrix, rhs=rhs, meta=meta)


class SolveReport(NamedTuple):
    c: np.ndarray
    min_pivot: float
    condition: float
    residual: float


def _failed_pivot(A: np.ndarray, order: int) -> float:
    """The pivot a Cholesky factorisation meets at the 1-based leading minor ``order``."""
    k = order - 1
    if k == 0:
        return float(A[0, 0])
    R = cholesky(A[:k, :k], lower=False)
    y = solve_triangular(R, A[:k, k], trans="T", lower=False)
    return float(A[k, k] - y @ y)


def cholesky_solve(system: DenseSystem | tuple[np.ndarray, np.ndarray]) -> SolveReport:
    """Solve A c = b by Cholesky; no diagonal shift is ever applied."""
    A, b = (system.matrix, system.rhs) if isinstance(system, DenseSystem) else system
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise SpdoInputError(f"cannot solve a {A.shape} system with a right-hand side of shape {b.shape}")

    potrf, pocon = get_lapack_funcs(("potrf", "pocon"), (A,))
    R, info = potrf(A, lower=False, clean=True)
    if info > 0:
        pivot = _failed_pivot(A, info)
        raise SpdoNotPositiveDefiniteError(
            f"Cholesky breakdown at leading minor {info} of {A.shape[0]} (pivot {pivot:.3e}); "
            "the matrix is not positive definite: check the shape coefficients and the truncation",
            order=int(info),
            pivot=pivot,
        )
    if info < 0:
        raise SpdoInputError(f"LAPACK potrf rejected argument {-info}")

    rcond, _ = pocon(R, np.linalg.norm(A, 1))
    condition = math.inf if rcond == 0.0 else 1.0 / float(rcond)
    c = cho_solve((R, False), b)
    bnorm = float(np.linalg.norm(b))
    residual = float(np.linalg.norm(A @ c - b)) / bnorm if bnorm else 0.0
    if residual > RESIDUAL_TOL * max(condition, 1.0):
        log.warning("Relative residual %.3g exceeds %.0e x condition %.3g.", residual, RESIDUAL_TOL, condition)
    min_pivot = float(np.min(np.diag(R)) ** 2)
    log.debug("Cholesky: N=%d, min pivot %.3g, condition %.3g.", A.shape[0], min_pivot, condition)
    return SolveReport(c=c, min_pivot=min_pivot, condition=condition, residual=residual)


# ── Kernel part and solutions ───────────────────────────


def kernel_labels(L: SpectralSymbol) -> list[tuple[int, int]]:
    return [(l, m) for l in sorted(L.kernel_set) for m in range(-l, l + 1)]


def expansion_pairing(mu: Functional, c: np.ndarray, shape: ShapeFunction, X, l_max: int) -> float:
    """<mu, sum_j c_j Phi_j> with Phi_j truncated at l_max."""
    pts = _points(X)
    n = pts.shape[1]
    phi = shape.coefficients(l_max)
    if isinstance(mu, PointEvaluation):
        weights = harmonic_dims(n, l_max) / sphere_area(n) * phi
        return float(legendre_series(n, weights, np.clip(pts @ mu.point, -1.0, 1.0)) @ c)
    if mu.n != n:
        raise SpdoInputError(f"functional lives on n={mu.n}, points in R^{n}")
    if mu.mode == "zonal":
        L = min(l_max, mu.l_max)
        return float(legendre_series(n, mu.coeffs[: L + 1] * phi[: L + 1], np.clip(pts @ mu.axis, -1.0, 1.0)) @ c)
    L = min(l_max, mu.l_max)
    weights = mu.coeffs[: (L + 1) ** 2] * np.repeat(phi[: L + 1], 2 * np.arange(L + 1) + 1)
    return float((real_harmonics_n3(L, pts) @ weights) @ c)


def kernel_correction(
    constraints: UnisolventConstraints,
    L: SpectralSymbol,
    c: np.ndarray,
    shape: ShapeFunction,
    X,
    l_max: int,
) -> dict[tuple[int, int], float]:
    """Coefficients of u0 in ker L so that <mu_i, u0 + u1> = gamma_i."""
    B = constraints.matrix(L)
    if B.size == 0:
        return {}
    r = np.array([
        gamma - expansion_pairing(mu, c, shape, X, l_max)
        for mu, gamma in zip(constraints.functionals, constraints.targets)
    ])
    coeffs = np.linalg.solve(B, r)
    return dict(zip(kernel_labels(L), (float(v) for v in coeffs)))


@dataclass(frozen=True, eq=False)
class SolutionBundle:
    """u~ = u0 + sum_j c_j Phi_j."""

    c: np.ndarray
    kernel_coeffs: dict[tuple[int, int], float]
    meta: SystemMeta
    shape: ShapeFunction
    points: PointSet
    report: SolveReport | None = None
    system: DenseSystem | None = None

    @property
    def n(self) -> int:
        return self.points.n

    @property
    def l_max(self) -> int:
        return self.meta.l_max

    def evaluate(self, x) -> np.ndarray | float:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        n = self.n
        weights = harmonic_dims(n, self.l_max) / sphere_area(n) * self.shape.coefficients(self.l_max)
        out = legendre_series(n, weights, np.clip(pts @ self.points.points.T, -1.0, 1.0)) @ self.c
        if self.kernel_coeffs:
            labels = list(self.kernel_coeffs)
            values, basis_labels = harmonic_basis(n, {l for l, _ in labels}, pts)
            k = np.array([self.kernel_coeffs[lab] for lab in basis_labels])
            out = out + values @ k
        return float(out[0]) if np.ndim(x) == 1 else out

    def pairing(self, mu: Functional) -> float:
        """<mu, u~>."""
        total = expansion_pairing(mu, self.c, self.shape, self.points, self.l_max)
        if self.kernel_coeffs:
            degrees = sorted({l for l, _ in self.kernel_coeffs})
            on_basis = functional_on_harmonics(mu, self.n, degrees)
            total += float(on_basis @ np.array(list(self.kernel_coeffs.values())))
        return total


@dataclass(frozen=True, eq=False)
class Problem:
    """L u = g with optional constraints fixing the ker L component."""

    method: str
    symbol: SpectralSymbol
    shape: ShapeFunction
    points: PointSet
    rhs: Rhs
    l_max: int | None = None
    constraints: UnisolventConstraints = field(default_factory=UnisolventConstraints)
    tolerance: float | None = None
    threads: int = 1


def solve(problem: Problem) -> SolutionBundle:
    """Assemble, factor, and add the ker L correction.

    Without an explicit ``l_max`` the smallest one whose tail bound meets
    ``tolerance`` (1e-4 by default) is chosen.
    """
    L, shape = problem.symbol, problem.shape
    l_max = problem.l_max
    if l_max is None:
        l_max = select_lmax(problem.method, L, shape, problem.tolerance or DEFAULT_TOLERANCE)
    conditions = theory_conditions(L, shape)
    if not getattr(conditions, problem.method, True):
        log.warning(
            "%s with '%s' (order %g) and '%s' (tau=%g) is outside the proven convergence range.",
            problem.method, L.name, L.order, shape.name, shape.tau,
        )
    system = build_system(
        problem.method, L, shape, problem.points, problem.rhs, l_max,
        tolerance=problem.tolerance, threads=problem.threads,
    )
    report = cholesky_solve(system)
    kernel = kernel_correction(problem.constraints, L, report.c, shape, problem.points, l_max)
    return SolutionBundle(
        c=report.c, kernel_coeffs=kernel, meta=system.meta, shape=shape, points=problem.points,
        report=report, system=system,
    )
