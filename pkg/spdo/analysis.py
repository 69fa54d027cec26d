"""Sobolev-norm errors, convergence orders, and exact benchmark data.

Errors are measured in coefficient space,

    ||v||_s^2 = sum_l (l+1)^(2s) sum_m |v_hat[l, m]|^2,

never by quadrature of the pointwise error.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import SpdoInputError
from .kernels import GENERAL, ShapeFunction, SpectralFunction, native_inner, srbf_function
from .operators import (
    SpectralSymbol,
    UnisolventConstraints,
    apply,
    functional_on_harmonics,
    mean_value_functional,
    pair,
)
from .sphcore import harmonic_basis, harmonic_dims, legendre_moments, real_harmonics_n3, sphere_area

log = logging.getLogger("spdo.analysis")

DIRICHLET_RATIO = 0.25
DIRICHLET_LMAX = 40  # 0.25^40 (l+1) is far below double precision
TAIL_RATIO = 1e-2


@dataclass(frozen=True, eq=False)
class ErrorReport:
    s: float
    value: float
    l_max_used: int
    tail_estimate: float
    decomposition: np.ndarray | None = None
    warning: str | None = None


@dataclass(frozen=True)
class ConvergenceRow:
    N: int | None
    h_X: float
    error: float
    eoc: float | None = None


def _points(X) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(X, "points", X), dtype=float))


# ── Spectral coefficients of SRBF expansions ────────────


def srbf_spectral_coeffs(c, shape: ShapeFunction, X, l_max: int) -> SpectralFunction:
    """Coefficients phi_hat(l) sum_j c_j Y_{l,m}(x_j) of sum_j c_j Phi_j (n = 3)."""
    pts = _points(X)
    if pts.shape[1] != 3:
        raise SpdoInputError("explicit SRBF coefficients exist for n=3 only; use sobolev_error for norms")
    c = np.asarray(c, dtype=float)
    if c.shape != (pts.shape[0],):
        raise SpdoInputError(f"{c.size} coefficients for {pts.shape[0]} centres")
    phi = np.repeat(shape.coefficients(l_max), 2 * np.arange(l_max + 1) + 1)
    return SpectralFunction.general(phi * (c @ real_harmonics_n3(l_max, pts)))


def _kernel_function(kernel_coeffs: dict[tuple[int, int], float], n: int, l_max: int) -> SpectralFunction:
    if not kernel_coeffs:
        return SpectralFunction.zero(n, l_max)
    if n != 3:
        if set(kernel_coeffs) != {(0, 0)}:
            raise SpdoInputError("kernel components above degree 0 need n=3")
        axis = np.zeros(n)
        axis[-1] = 1.0
        return SpectralFunction.zonal(n, axis, [kernel_coeffs[(0, 0)] / math.sqrt(sphere_area(n))])
    return SpectralFunction.from_harmonics(kernel_coeffs, l_max)


# ── Errors ──────────────────────────────────────────────


def _cross_terms(exact: SpectralFunction, c: np.ndarray, shape: ShapeFunction, pts: np.ndarray, L: int) -> np.ndarray:
    """Per-degree |u_hat - (u1)_hat|^2 without explicit harmonics when exact is zonal."""
    n = pts.shape[1]
    ex = exact.truncated(L)
    phi = shape.coefficients(L)
    N_over_w = harmonic_dims(n, L) / sphere_area(n)
    energy = ex.degree_energy()

    if ex.mode == GENERAL:
        proj = c @ real_harmonics_n3(L, pts)
        mixed = np.add.reduceat(ex.coeffs * proj, np.arange(L + 1) ** 2)
    else:
        cos = np.clip(pts @ ex.axis, -1.0, 1.0)
        mixed = ex.coeffs * legendre_moments(n, L, cos, c)

    iu, ju = np.triu_indices(pts.shape[0], k=1)
    gram = float(c @ c) + (
        legendre_moments(n, L, np.clip(np.einsum("ij,ij->i", pts[iu], pts[ju]), -1.0, 1.0), 2.0 * c[iu] * c[ju])
        if iu.size else np.zeros(L + 1)
    )
    return energy - 2.0 * phi * mixed + phi**2 * N_over_w * gram


def sobolev_error(
    exact: SpectralFunction,
    c,
    shape: ShapeFunction,
    X,
    s: float,
    l_max: int,
    *,
    kernel_coeffs: dict[tuple[int, int], float] | None = None,
    path: str = "auto",
    tail_ratio: float = TAIL_RATIO,
) -> ErrorReport:
    """||exact - (u0 + sum_j c_j Phi_j)||_s over degrees 0..l_max.

    ``path="cross"`` expands the square with the addition formula (any n);
    ``path="direct"`` differences explicit coefficients (n = 3). ``auto``
    picks direct for general-mode exact data and cross otherwise.
    """
    pts = _points(X)
    n = pts.shape[1]
    c = np.asarray(c, dtype=float)
    if exact.n != n:
        raise SpdoInputError(f"exact solution lives on n={exact.n}, points in R^{n}")
    if c.shape != (pts.shape[0],):
        raise SpdoInputError(f"{c.size} coefficients for {pts.shape[0]} centres")
    kernel_coeffs = kernel_coeffs or {}
    if path == "auto":
        path = "direct" if exact.mode == GENERAL else "cross"

    if path == "direct":
        approx = srbf_spectral_coeffs(c, shape, pts, l_max)
        if kernel_coeffs:
            k = _kernel_function(kernel_coeffs, n, l_max).to_general().coeffs
            approx = SpectralFunction.general(approx.coeffs + k)
        diff = SpectralFunction.general(exact.truncated(l_max).to_general().coeffs - approx.coeffs)
        per_degree = diff.degree_energy()
    elif path == "cross":
        per_degree = _cross_terms(exact, c, shape, pts, l_max)
        for l in sorted({l for l, _ in kernel_coeffs}):
            labels = [(l, m) for m in range(-l, l + 1)]
            k = np.array([kernel_coeffs.get(lab, 0.0) for lab in labels])
            values, _ = harmonic_basis(n, [l], pts)
            u1 = shape.coefficients(l_max)[l] * (c @ values)
            u_hat = functional_on_harmonics(exact, n, [l]) if l <= exact.l_max else np.zeros_like(k)
            per_degree[l] += float(-2.0 * u_hat @ k + 2.0 * u1 @ k + k @ k)
    else:
        raise SpdoInputError(f"unknown error path '{path}' (use auto, cross or direct)")

    weights = (np.arange(l_max + 1) + 1.0) ** (2.0 * s)
    decomposition = weights * per_degree
    total = float(decomposition.sum())
    value = math.sqrt(max(total, 0.0))

    tail = _tail_estimate(exact, c, shape, n, s, l_max)
    warning = None
    if tail > tail_ratio * max(value, 1e-300):
        warning = f"tail beyond l={l_max} estimated at {tail:.3g}, comparable to the error {value:.3g}"
        log.warning("Error report: %s.", warning)
    return ErrorReport(
        s=s, value=value, l_max_used=l_max, tail_estimate=tail, decomposition=decomposition, warning=warning
    )


def _tail_estimate(exact: SpectralFunction, c: np.ndarray, shape: ShapeFunction, n: int, s: float, L: int) -> float:
    """Bound on the H^s norm of both functions beyond degree L."""
    exact_tail = 0.0
    if exact.l_max > L:
        energy = exact.degree_energy()[L + 1 :]
        exact_tail = math.sqrt(float(np.sum((np.arange(L + 1, exact.l_max + 1) + 1.0) ** (2.0 * s) * energy)))
    exponent = 2.0 * s + n - 2 - 4.0 * shape.tau
    if exponent >= -1.0:
        return math.inf
    top = shape.l_max_table
    lt = np.arange(top // 2, top + 1, dtype=float)
    c2 = float(np.max(shape.coeffs[top // 2 :] * (lt + 1.0) ** (2.0 * shape.tau)))
    approx_sq = (
        2.0 / sphere_area(n) * c2**2 * float(np.abs(c).sum()) ** 2
        * (L + 1.0) ** (exponent + 1.0) / (-exponent - 1.0)
    )
    return exact_tail + math.sqrt(approx_sq)


# ── Convergence orders ──────────────────────────────────


def _unpack(row) -> tuple[int | None, float, float]:
    if isinstance(row, ConvergenceRow):
        return row.N, row.h_X, row.error
    if len(row) == 2:
        return None, float(row[0]), float(row[1])
    return int(row[0]), float(row[1]), float(row[2])


def eoc(rows: Sequence) -> list[ConvergenceRow]:
    """Consecutive orders log(e_{k-1}/e_k) / log(h_{k-1}/h_k).

    Rows are (h, error), (N, h, error) or ConvergenceRow; h must strictly decrease.
    """
    data = [_unpack(r) for r in rows]
    out: list[ConvergenceRow] = []
    for k, (N, h, e) in enumerate(data):
        if e <= 0 or h <= 0:
            raise SpdoInputError(f"row {k}: mesh norm and error must be positive (h={h}, error={e})")
        rate = None
        if k:
            h_prev, e_prev = data[k - 1][1], data[k - 1][2]
            if h >= h_prev:
                raise SpdoInputError(f"row {k}: mesh norms must strictly decrease ({h_prev} then {h})")
            rate = math.log(e_prev / e) / math.log(h_prev / h)
        out.append(ConvergenceRow(N=N, h_X=h, error=e, eoc=rate))
    return out


def global_eoc(rows: Sequence) -> float:
    """Least-squares slope of log(error) against log(h)."""
    data = [_unpack(r) for r in rows]
    if len(data) < 2:
        raise SpdoInputError("a global order needs at least two rows")
    h = np.log([d[1] for d in data])
    e = np.log([d[2] for d in data])
    slope, _ = np.polyfit(h, e, 1)
    return float(slope)


def predicted_rate(shape: ShapeFunction, s: float) -> float:
    """Order 2 tau - s for errors in H^s with a smooth exact solution."""
    return 2.0 * shape.tau - s


# ── Reproducing property ────────────────────────────────


def verify_reproducing(shape: ShapeFunction, X, trials: int, l_max: int, *, seed: int = 0) -> float:
    """max |v(x_j) - <v, Phi_j>_phi| over random band-limited v and all centres (n = 3).

    Degrees of v beyond the shape table are invisible to the kernel, so such v
    give a nonzero deviation.
    """
    pts = _points(X)
    rng = np.random.default_rng(seed)
    L_kernel = min(l_max, shape.l_max_table)
    srbfs = [srbf_function(shape, x, L_kernel) for x in pts]
    worst = 0.0
    for _ in range(trials):
        v = SpectralFunction.random_band_limited(l_max, rng)
        values = np.atleast_1d(v.evaluate(pts))
        inner = np.array([_native_or_truncated(v, phi_j, shape, L_kernel) for phi_j in srbfs])
        worst = max(worst, float(np.max(np.abs(values - inner))))
    return worst


def _native_or_truncated(v: SpectralFunction, phi_j: SpectralFunction, shape: ShapeFunction, L: int) -> float:
    return native_inner(v.truncated(L) if v.l_max > L else v, phi_j, shape)


# ── Benchmark: exterior Dirichlet problem ───────────────


class DirichletSolution(NamedTuple):
    U_D: SpectralFunction
    g: SpectralFunction
    u: SpectralFunction


def _north(n: int = 3) -> np.ndarray:
    axis = np.zeros(n)
    axis[-1] = 1.0
    return axis


def exact_dirichlet_solution(l_max: int = DIRICHLET_LMAX) -> DirichletSolution:
    """Zonal data of the point-source benchmark about the x3 axis.

    U_D = (1.0625 - 0.5 x3)^(-1/2), the trace of 1/|x - q| with q = 4 e3;
    S u = g with g = -U_D/2 + D U_D and u = (0.25 x3 - 1) / (1.0625 - 0.5 x3)^(3/2).
    """
    ls = np.arange(l_max + 1, dtype=float)
    powers = DIRICHLET_RATIO**ls
    axis = _north()
    return DirichletSolution(
        U_D=SpectralFunction.zonal(3, axis, powers),
        g=SpectralFunction.zonal(3, axis, -(ls + 1.0) / (2.0 * ls + 1.0) * powers),
        u=SpectralFunction.zonal(3, axis, -(ls + 1.0) * powers),
    )


def dirichlet_U_D(x) -> np.ndarray:
    z = np.atleast_2d(np.asarray(x, dtype=float))[:, 2]
    return (1.0625 - 0.5 * z) ** -0.5


def dirichlet_u(x) -> np.ndarray:
    z = np.atleast_2d(np.asarray(x, dtype=float))[:, 2]
    return (0.25 * z - 1.0) / (1.0625 - 0.5 * z) ** 1.5


def dirichlet_g(x) -> np.ndarray:
    """g = -U_D/2 - (1/2) sum r^l P_l / (2l+1), the second sum by one quadrature per point.

    sum_l r^l P_l(t) / (2l+1) = r^(-1/2) int_0^sqrt(r) (1 - 2 p^2 t + p^4)^(-1/2) dp.
    """
    z = np.atleast_2d(np.asarray(x, dtype=float))[:, 2]
    r = DIRICHLET_RATIO
    root = math.sqrt(r)
    out = np.empty_like(z)
    for k, t in enumerate(z):
        val, _ = integrate.quad(lambda p: (1.0 - 2.0 * p * p * t + p**4) ** -0.5, 0.0, root, epsabs=1e-15, epsrel=1e-14)
        out[k] = -0.5 * (1.0 - 2.0 * r * t + r * r) ** -0.5 - 0.5 * val / root
    return out


G_POLE = -2.0 / 3.0 - math.atanh(0.5)


class ManufacturedProblem(NamedTuple):
    symbol: SpectralSymbol
    u: SpectralFunction
    g: SpectralFunction
    constraints: UnisolventConstraints


def manufactured_problem(L: SpectralSymbol, l_max: int = DIRICHLET_LMAX) -> ManufacturedProblem:
    """u = the benchmark profile, g = L u, and a mean-value constraint when ker L = constants."""
    if L.n != 3:
        raise SpdoInputError("manufactured problems are defined on S^2")
    u = exact_dirichlet_solution(l_max).u
    if not L.kernel_set:
        constraints = UnisolventConstraints()
    elif L.kernel_set == frozenset({0}):
        mu = mean_value_functional(3)
        constraints = UnisolventConstraints((mu,), (pair(mu, u),))
    else:
        raise SpdoInputError(f"no manufactured constraints for ker '{L.name}' = degrees {sorted(L.kernel_set)}")
    return ManufacturedProblem(symbol=L, u=u, g=apply(L, u), constraints=constraints)
