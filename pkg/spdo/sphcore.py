"""Spherical harmonics and normalised Legendre polynomials on S^(n-1).

Production code only ever needs the zonal polynomials P_l(n; t), normalised
so that P_l(n; 1) = 1, because every sum over an orthonormal basis collapses
through the addition formula

    sum_m Y_{l,m}(x) Y_{l,m}(y) = N(n, l) / omega_n * P_l(n; x . y).

Explicit real harmonics exist for n = 3 only and are used as a test oracle
and for the kernel of an operator when it contains degrees above zero.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np

from .errors import SpdoInputError

log = logging.getLogger("spdo.sphcore")

ABSCISSA_TOL = 1e-12
UNIT_TOL = 1e-12


def _check_dim(n: int) -> None:
    if n < 3:
        raise SpdoInputError(f"ambient dimension n={n} must be >= 3 (the sphere is S^(n-1))")


def sphere_area(n: int) -> float:
    """Surface area of S^(n-1) in R^n: 2 pi^(n/2) / Gamma(n/2)."""
    if n < 1:
        raise SpdoInputError(f"sphere_area needs n >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class SphereDim:
    """Ambient dimension n of the sphere S^(n-1)."""

    n: int

    def __post_init__(self) -> None:
        _check_dim(self.n)

    @property
    def omega_n(self) -> float:
        return sphere_area(self.n)

    @property
    def omega_equator(self) -> float:
        """Area of S^(n-2); the weight in the Funk–Hecke formula."""
        return sphere_area(self.n - 1)


def harmonic_dim(n: int, l: int) -> int:
    """Dimension N(n, l) of the space of degree-l spherical harmonics on S^(n-1)."""
    _check_dim(n)
    if l < 0:
        raise SpdoInputError(f"degree l={l} must be >= 0")
    if l == 0:
        return 1
    return (2 * l + n - 2) * math.comb(l + n - 3, l - 1) // l


def harmonic_dims(n: int, l_max: int) -> np.ndarray:
    """N(n, 0..l_max) as a float array."""
    return np.array([harmonic_dim(n, l) for l in range(l_max + 1)], dtype=float)


def _abscissae(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.abs(arr) > 1.0 + ABSCISSA_TOL):
        worst = float(np.max(np.abs(arr)))
        raise SpdoInputError(f"Legendre abscissa outside [-1, 1]: |t|={worst!r}")
    return np.clip(arr, -1.0, 1.0)


def _recurrence(n: int, l_max: int, t: np.ndarray) -> Iterator[np.ndarray]:
    """Yield P_0(n; t), ..., P_l_max(n; t), one degree at a time.

    Forward Gegenbauer recurrence in the P_l(n; 1) = 1 normalisation:
        (l + n - 2) P_{l+1} = (2l + n - 2) t P_l - l P_{l-1}.
    Yielded arrays must not be modified by the caller.
    """
    p_prev = np.ones_like(t)
    yield p_prev
    if l_max == 0:
        return
    p = t.copy()
    yield p
    for l in range(1, l_max):
        p_next = ((2 * l + n - 2) * t * p - l * p_prev) / (l + n - 2)
        yield p_next
        p_prev, p = p, p_next


@dataclass(frozen=True)
class LegendreTable:
    """P_0..P_l_max(n; t) tabulated at a fixed set of abscissae.

    ``values[l, k]`` is P_l(n; nodes[k]).
    """

    n: int
    l_max: int
    nodes: np.ndarray
    values: np.ndarray


def legendre_table(n: int, l_max: int, t) -> LegendreTable:
    _check_dim(n)
    if l_max < 0:
        raise SpdoInputError(f"l_max={l_max} must be >= 0")
    nodes = np.atleast_1d(_abscissae(t))
    values = np.empty((l_max + 1, nodes.size))
    for l, p in enumerate(_recurrence(n, l_max, nodes)):
        values[l] = p
    return LegendreTable(n=n, l_max=l_max, nodes=nodes, values=values)


def legendre_eval(n: int, l_max: int, t: float) -> np.ndarray:
    """Vector (P_0(n; t), ..., P_l_max(n; t)) at a single abscissa."""
    return legendre_table(n, l_max, [t]).values[:, 0]


def legendre_series(n: int, weights, t) -> np.ndarray:
    """sum_l weights[l] * P_l(n; t) for an array of abscissae.

    One recurrence pass over l per abscissa, summed in increasing l, so the
    result for a given abscissa does not depend on how the array is chunked.
    """
    _check_dim(n)
    w = np.asarray(weights, dtype=float)
    nodes = _abscissae(t)
    out = np.zeros_like(nodes, dtype=float)
    if w.size == 0:
        return out
    for wl, p in zip(w, _recurrence(n, w.size - 1, nodes)):
        if wl != 0.0:
            out += wl * p
    return out


def legendre_moments(n: int, l_max: int, t, w) -> np.ndarray:
    """sum_k w[k] * P_l(n; t[k]) for every l in 0..l_max."""
    _check_dim(n)
    nodes = np.atleast_1d(_abscissae(t))
    weights = np.asarray(w, dtype=float)
    return np.array([weights @ p for p in _recurrence(n, l_max, nodes)])


# ── Real spherical harmonics, n = 3 ─────────────────────


def harmonic_index(l: int, m: int) -> int:
    """Column of Y_{l,m} in the (l, m) ordering, m = -l..l."""
    return l * l + l + m


def harmonic_labels(l_max: int) -> list[tuple[int, int]]:
    return [(l, m) for l in range(l_max + 1) for m in range(-l, l + 1)]


def _unit_rows(x, dim: int | None = None) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if dim is not None and pts.shape[1] != dim:
        raise SpdoInputError(f"expected points in R^{dim}, got shape {pts.shape}")
    dev = np.abs(np.linalg.norm(pts, axis=1) - 1.0)
    bad = np.flatnonzero(dev > UNIT_TOL)
    if bad.size:
        raise SpdoInputError(
            f"point {int(bad[0])} is not on the unit sphere (| |x| - 1 | = {dev[bad[0]]:.3g})"
        )
    return pts


def real_harmonics_n3(l_max: int, x) -> np.ndarray:
    """Real orthonormal Y_{l,m} on S^2 at one point or a stack of points.

    Returns shape ((l_max+1)^2,) for a single point and (K, (l_max+1)^2) for
    K points, columns ordered by (l, m) with m = -l..l. m > 0 carries
    cos(m phi), m < 0 carries sin(|m| phi); no Condon–Shortley phase.
    """
    if l_max < 0:
        raise SpdoInputError(f"l_max={l_max} must be >= 0")
    single = np.ndim(x) == 1
    pts = _unit_rows(x, dim=3)
    z = np.clip(pts[:, 2], -1.0, 1.0)
    u = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.arctan2(pts[:, 1], pts[:, 0])

    out = np.empty((pts.shape[0], (l_max + 1) ** 2))
    sqrt2 = math.sqrt(2.0)

    q_mm = np.full(pts.shape[0], 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(l_max + 1):
        if m > 0:
            q_mm = math.sqrt((2 * m + 1) / (2 * m)) * u * q_mm
        cos_m = np.cos(m * phi)
        sin_m = np.sin(m * phi)

        def store(l: int, q: np.ndarray) -> None:
            if m == 0:
                out[:, harmonic_index(l, 0)] = q
            else:
                out[:, harmonic_index(l, m)] = sqrt2 * q * cos_m
                out[:, harmonic_index(l, -m)] = sqrt2 * q * sin_m

        store(m, q_mm)
        if m == l_max:
            break
        q_lm2, q_lm1 = q_mm, math.sqrt(2 * m + 3) * z * q_mm
        store(m + 1, q_lm1)
        for l in range(m + 2, l_max + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt((2 * l + 1) * ((l - 1) ** 2 - m * m) / ((2 * l - 3) * (l * l - m * m)))
            q_l = a * z * q_lm1 - b * q_lm2
            store(l, q_l)
            q_lm2, q_lm1 = q_lm1, q_l

    return out[0] if single else out


def harmonic_basis(n: int, degrees: Iterable[int], points) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Orthonormal harmonics of the given degrees evaluated at points.

    Degree 0 (the constant 1/sqrt(omega_n)) works for any n; higher degrees
    need the explicit n = 3 basis. Returns (values of shape (K, M), labels).
    """
    _check_dim(n)
    degs = sorted(set(int(d) for d in degrees))
    pts = _unit_rows(points, dim=n)
    labels: list[tuple[int, int]] = []
    columns: list[np.ndarray] = []
    high = [d for d in degs if d > 0]
    if high and n != 3:
        raise SpdoInputError(
            f"explicit harmonics of degree {high} are only available for n=3 (got n={n})"
        )
    y = real_harmonics_n3(max(high), pts) if high else None
    for d in degs:
        if d == 0:
            labels.append((0, 0))
            columns.append(np.full(pts.shape[0], 1.0 / math.sqrt(sphere_area(n))))
            continue
        for m in range(-d, d + 1):
            labels.append((d, m))
            columns.append(y[:, harmonic_index(d, m)])
    values = np.column_stack(columns) if columns else np.empty((pts.shape[0], 0))
    return values, labels


# ── Quadrature ──────────────────────────────────────────


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and positive weights for integrals over an interval."""

    nodes: np.ndarray
    weights: np.ndarray

    def mapped(self, a: float, b: float) -> "QuadratureRule":
        """The same rule carried affinely from [-1, 1] onto [a, b]."""
        half = 0.5 * (b - a)
        return QuadratureRule(nodes=a + half * (self.nodes + 1.0), weights=half * self.weights)

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))


def gauss_legendre(k: int) -> QuadratureRule:
    """k-node Gauss–Legendre rule on [-1, 1]; exact for degree <= 2k - 1."""
    if k < 1:
        raise SpdoInputError(f"Gauss–Legendre rule needs k >= 1 nodes, got {k}")
    nodes, weights = np.polynomial.legendre.leggauss(k)
    return QuadratureRule(nodes=nodes, weights=weights)


def default_quadrature_nodes(l_max: int) -> int:
    return max(64, 2 * l_max + 16)
