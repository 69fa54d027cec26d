"""Zonal shape functions, spherical radial basis functions, and spectral functions.

A shape function phi on [-1, 1] defines the kernel Phi(x, y) = phi(x . y)
and is carried by its Fourier–Legendre coefficients

    phi_hat(l) = omega_{n-1} * int_{-1}^{1} phi(t) P_l(n; t) (1 - t^2)^((n-3)/2) dt,

so that phi(t) = sum_l N(n, l) / omega_n * phi_hat(l) * P_l(n; t).
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .errors import SpdoInputError, SpdoQuadratureError
from .sphcore import (
    _abscissae,
    _unit_rows,
    default_quadrature_nodes,
    gauss_legendre,
    harmonic_dims,
    harmonic_index,
    legendre_eval,
    legendre_moments,
    legendre_series,
    real_harmonics_n3,
    sphere_area,
)

log = logging.getLogger("spdo.kernels")

COEFF_FLOOR = 1e-300
NEGATIVE_ROUNDOFF = 1e-15


@dataclass(frozen=True, eq=False)
class ShapeFunction:
    """A zonal shape function phi with its tabulated coefficients phi_hat(0..l_max_table)."""

    name: str
    n: int
    coeffs: np.ndarray
    tau: float
    closed_form: Callable[[np.ndarray], np.ndarray] | None = None
    kink_t: float | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def l_max_table(self) -> int:
        return self.coeffs.size - 1

    def coefficients(self, l_max: int) -> np.ndarray:
        if l_max > self.l_max_table:
            raise SpdoInputError(
                f"shape '{self.name}' is tabulated to l={self.l_max_table}, {l_max} requested"
            )
        return self.coeffs[: l_max + 1]

    def squared(self) -> "ShapeFunction":
        """The shape whose coefficients are phi_hat(l)^2 (no closed form)."""
        return ShapeFunction(
            name=f"{self.name}^2", n=self.n, coeffs=self.coeffs**2, tau=2.0 * self.tau,
        )

    def with_coefficient(self, l: int, value: float) -> "ShapeFunction":
        """Copy with phi_hat(l) replaced; the closed form no longer matches and is dropped."""
        coeffs = self.coeffs.copy()
        coeffs[l] = value
        return replace(self, name=f"{self.name}[l={l}:={value:g}]", coeffs=coeffs, closed_form=None)


# ── Coefficient tables ──────────────────────────────────


def shape_from_radial(
    rho: Callable[[np.ndarray], np.ndarray],
    *,
    n: int,
    l_max_table: int,
    tau: float,
    name: str,
    kink_r: float | None = None,
    support_r: float = 2.0,
    nodes_per_panel: int | None = None,
) -> ShapeFunction:
    """Tabulate phi(t) = rho(sqrt(2 - 2t)) by Gauss–Legendre quadrature.

    The integral runs in the chordal distance r = sqrt(2 - 2t) (t = 1 - r^2/2,
    dt = -r dr), split into panels at the kink and the support radius. In r the
    Wendland integrands are polynomials, so each panel is exact once it has more
    than l_max_table + 2 nodes.
    """
    if l_max_table < 0:
        raise SpdoInputError(f"l_max_table={l_max_table} must be >= 0")
    k = nodes_per_panel or default_quadrature_nodes(l_max_table)
    breaks = sorted({0.0, min(support_r, 2.0)} | ({kink_r} if kink_r and 0.0 < kink_r < support_r else set()))
    rule = gauss_legendre(k)
    omega_equator = sphere_area(n - 1)

    coeffs = np.zeros(l_max_table + 1)
    for a, b in zip(breaks[:-1], breaks[1:]):
        panel = rule.mapped(a, b)
        r = panel.nodes
        t = 1.0 - 0.5 * r * r
        jacobian = r * (r * r * (1.0 - 0.25 * r * r)) ** ((n - 3) / 2)
        coeffs += legendre_moments(n, l_max_table, t, panel.weights * rho(r) * jacobian)
    coeffs *= omega_equator

    bad = np.flatnonzero(coeffs <= -NEGATIVE_ROUNDOFF)
    if bad.size:
        l = int(bad[0])
        raise SpdoQuadratureError(
            f"shape '{name}': phi_hat({l}) = {coeffs[l]:.3e} < 0; "
            "the kernel is not positive definite on this sphere or the quadrature failed"
        )
    tiny = np.flatnonzero(coeffs <= 0.0)
    if tiny.size:
        log.warning(
            "shape '%s': %d coefficient(s) within roundoff of zero clamped to %g (first l=%d).",
            name, tiny.size, COEFF_FLOOR, int(tiny[0]),
        )
        coeffs[tiny] = COEFF_FLOOR

    def closed_form(t: np.ndarray) -> np.ndarray:
        return rho(np.sqrt(np.maximum(0.0, 2.0 - 2.0 * np.asarray(t, dtype=float))))

    kink_t = None if kink_r is None else 1.0 - 0.5 * kink_r * kink_r
    return ShapeFunction(name=name, n=n, coeffs=coeffs, tau=tau, closed_form=closed_form, kink_t=kink_t)


def _wendland_c0(r: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - r) ** 2


def _wendland_c2(r: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - r) ** 4 * (4.0 * r + 1.0)


WENDLAND_PROFILES: dict[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    # name -> (rho, native-space exponent beyond n/2)
    "wendland": (_wendland_c0, 0.0),
    "wendland-c2": (_wendland_c2, 1.0),
}


def wendland_shape(n: int = 3, l_max_table: int = 800, *, variant: str = "wendland") -> ShapeFunction:
    """Wendland shape phi(t) = rho(sqrt(2 - 2t)), default rho(r) = (1 - r)_+^2.

    The native space of the restricted kernel is H^tau with tau = n/2 for
    (1 - r)_+^2 (tau = 3/2 on S^2) and n/2 + 1 for the C^2 variant.
    """
    try:
        rho, extra = WENDLAND_PROFILES[variant]
    except KeyError:
        raise SpdoInputError(
            f"unknown Wendland variant '{variant}'. Choose from: {', '.join(WENDLAND_PROFILES)}"
        ) from None
    return shape_from_radial(
        rho, n=n, l_max_table=l_max_table, tau=n / 2 + extra, name=variant, kink_r=1.0, support_r=1.0,
    )


class DecayFit(NamedTuple):
    c1: float
    c2: float
    tau_hat: float


def shape_decay_fit(shape: ShapeFunction, l_min: int | None = None, l_max: int | None = None) -> DecayFit:
    """Fit phi_hat(l) ~ (l + 1)^(-2 tau) over [l_min, l_max] (default: upper half of the table).

    Returns the envelope constants c1 <= phi_hat(l) (l+1)^(2 tau_hat) <= c2 over the range.
    """
    if shape.l_max_table < 50:
        raise SpdoInputError(f"decay fit needs a table to l >= 50, shape '{shape.name}' stops at {shape.l_max_table}")
    hi = shape.l_max_table if l_max is None else min(l_max, shape.l_max_table)
    lo = hi // 2 if l_min is None else l_min
    ls = np.arange(lo, hi + 1)
    vals = shape.coeffs[lo : hi + 1]
    keep = vals > 0
    if not np.all(keep):
        log.warning("shape '%s': %d non-positive coefficient(s) skipped in decay fit.", shape.name, int((~keep).sum()))
    x = np.log(ls[keep] + 1.0)
    y = np.log(vals[keep])
    slope, _ = np.polyfit(x, y, 1)
    tau_hat = -0.5 * slope
    scaled = vals[keep] * (ls[keep] + 1.0) ** (2.0 * tau_hat)
    return DecayFit(c1=float(scaled.min()), c2=float(scaled.max()), tau_hat=float(tau_hat))


# ── Kernel evaluation ───────────────────────────────────


def kernel_eval_series(shape: ShapeFunction, c, l_max: int | None = None):
    """sum_l N(n, l) / omega_n * phi_hat(l) * P_l(n; c), truncated at l_max."""
    L = shape.l_max_table if l_max is None else l_max
    weights = harmonic_dims(shape.n, L) * shape.coefficients(L) / sphere_area(shape.n)
    out = legendre_series(shape.n, weights, c)
    return float(out) if np.ndim(c) == 0 else out


def kernel_eval(shape: ShapeFunction, c):
    """phi(c); closed form when the shape has one, otherwise the truncated series."""
    if shape.closed_form is None:
        return kernel_eval_series(shape, c)
    out = shape.closed_form(_abscissae(c))
    return float(out) if np.ndim(c) == 0 else out


@dataclass(frozen=True, eq=False)
class ZonalKernel:
    """Phi(x, y) = phi(x . y) with a fixed set of centres x_j."""

    shape: ShapeFunction
    centers: np.ndarray

    def __post_init__(self) -> None:
        pts = getattr(self.centers, "points", self.centers)
        object.__setattr__(self, "centers", _unit_rows(pts, dim=self.shape.n))

    def __call__(self, x) -> np.ndarray:
        """Matrix [Phi_j(x_k)] with one row per evaluation point."""
        pts = _unit_rows(x, dim=self.shape.n)
        return kernel_eval(self.shape, np.clip(pts @ self.centers.T, -1.0, 1.0))

    def interpolation_matrix(self) -> np.ndarray:
        return self(self.centers)


# ── Spectral functions ──────────────────────────────────


GENERAL = "general"
ZONAL = "zonal"


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """A truncated function on S^(n-1) held in coefficient space.

    ``general`` (n = 3 only): coefficients v_hat[l, m] in (l, m) order.
    ``zonal`` (any n): Legendre coefficients a_l with v(x) = sum_l a_l P_l(n; x . axis).
    """

    n: int
    mode: str
    coeffs: np.ndarray
    axis: np.ndarray | None = None

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        if self.mode == GENERAL:
            if self.n != 3:
                raise SpdoInputError("general-mode spectral functions exist for n=3 only")
            root = math.isqrt(arr.size)
            if root * root != arr.size or arr.size == 0:
                raise SpdoInputError(f"general coefficients need (l_max+1)^2 entries, got {arr.size}")
        elif self.mode == ZONAL:
            if self.axis is None:
                raise SpdoInputError("zonal spectral functions need an axis")
            axis = _unit_rows(self.axis, dim=self.n)[0]
            axis.setflags(write=False)
            object.__setattr__(self, "axis", axis)
        else:
            raise SpdoInputError(f"unknown spectral mode '{self.mode}'")

    @classmethod
    def general(cls, coeffs) -> "SpectralFunction":
        return cls(n=3, mode=GENERAL, coeffs=coeffs)

    @classmethod
    def zonal(cls, n: int, axis, legendre) -> "SpectralFunction":
        return cls(n=n, mode=ZONAL, coeffs=legendre, axis=axis)

    @classmethod
    def zero(cls, n: int, l_max: int = 0) -> "SpectralFunction":
        axis = np.zeros(n)
        axis[-1] = 1.0
        return cls.zonal(n, axis, np.zeros(l_max + 1))

    @classmethod
    def from_harmonics(cls, terms: dict[tuple[int, int], float], l_max: int | None = None) -> "SpectralFunction":
        """General-mode function from a {(l, m): coefficient} mapping."""
        top = max((l for l, _ in terms), default=0)
        L = top if l_max is None else l_max
        coeffs = np.zeros((L + 1) ** 2)
        for (l, m), value in terms.items():
            coeffs[harmonic_index(l, m)] = value
        return cls.general(coeffs)

    @classmethod
    def random_band_limited(cls, l_max: int, rng: np.random.Generator) -> "SpectralFunction":
        return cls.general(rng.standard_normal((l_max + 1) ** 2))

    @property
    def l_max(self) -> int:
        if self.mode == GENERAL:
            return math.isqrt(self.coeffs.size) - 1
        return self.coeffs.size - 1

    def coefficient(self, l: int, m: int) -> float:
        """v_hat[l, m] (n = 3)."""
        if l > self.l_max:
            return 0.0
        return float(self.to_general().coeffs[harmonic_index(l, m)])

    def to_general(self) -> "SpectralFunction":
        """Explicit (l, m) coefficients; for zonal v, v_hat[l, m] = a_l * omega/N * Y_{l,m}(axis)."""
        if self.mode == GENERAL:
            return self
        if self.n != 3:
            raise SpdoInputError("explicit harmonic coefficients exist for n=3 only")
        y = real_harmonics_n3(self.l_max, self.axis)
        factor = sphere_area(3) / harmonic_dims(3, self.l_max) * self.coeffs
        return SpectralFunction.general(y * np.repeat(factor, 2 * np.arange(self.l_max + 1) + 1))

    def truncated(self, l_max: int) -> "SpectralFunction":
        if self.mode == GENERAL:
            keep = (l_max + 1) ** 2
            coeffs = np.zeros(keep)
            coeffs[: min(keep, self.coeffs.size)] = self.coeffs[:keep]
            return SpectralFunction.general(coeffs)
        coeffs = np.zeros(l_max + 1)
        coeffs[: min(l_max + 1, self.coeffs.size)] = self.coeffs[: l_max + 1]
        return SpectralFunction.zonal(self.n, self.axis, coeffs)

    def scaled_by_degree(self, factors) -> "SpectralFunction":
        """Multiply every degree-l component by factors[l]."""
        f = np.asarray(factors, dtype=float)[: self.l_max + 1]
        if self.mode == GENERAL:
            return SpectralFunction.general(self.coeffs * np.repeat(f, 2 * np.arange(self.l_max + 1) + 1))
        return SpectralFunction.zonal(self.n, self.axis, self.coeffs * f)

    def degree_energy(self) -> np.ndarray:
        """sum_m |v_hat[l, m]|^2 for each l."""
        if self.mode == GENERAL:
            starts = np.arange(self.l_max + 1) ** 2
            return np.add.reduceat(self.coeffs**2, starts)
        return self.coeffs**2 * sphere_area(self.n) / harmonic_dims(self.n, self.l_max)

    def evaluate(self, x) -> np.ndarray | float:
        if self.mode == GENERAL:
            out = real_harmonics_n3(self.l_max, x) @ self.coeffs
        else:
            pts = _unit_rows(x, dim=self.n)
            out = legendre_series(self.n, self.coeffs, np.clip(pts @ self.axis, -1.0, 1.0))
            if np.ndim(x) == 1:
                out = out[0]
        return float(out) if np.ndim(out) == 0 else out

    def sobolev_inner(self, other: "SpectralFunction", s: float) -> float:
        prods = degree_products(self, other)
        return float(np.sum((np.arange(prods.size) + 1.0) ** (2.0 * s) * prods))

    def sobolev_norm(self, s: float) -> float:
        energy = self.degree_energy()
        return math.sqrt(float(np.sum((np.arange(energy.size) + 1.0) ** (2.0 * s) * energy)))


def degree_products(v: SpectralFunction, w: SpectralFunction) -> np.ndarray:
    """sum_m v_hat[l, m] * w_hat[l, m] for l up to the smaller truncation."""
    if v.n != w.n:
        raise SpdoInputError(f"spectral functions live on different spheres (n={v.n} vs n={w.n})")
    L = min(v.l_max, w.l_max)
    if v.mode == ZONAL and w.mode == ZONAL:
        # Funk–Hecke: zonal functions about p and q pair through P_l(p . q).
        a = v.coeffs[: L + 1] * w.coeffs[: L + 1]
        cos_pq = float(np.clip(v.axis @ w.axis, -1.0, 1.0))
        return a * sphere_area(v.n) / harmonic_dims(v.n, L) * legendre_eval(v.n, L, cos_pq)
    gv = v.truncated(L).to_general().coeffs
    gw = w.truncated(L).to_general().coeffs
    return np.add.reduceat(gv * gw, np.arange(L + 1) ** 2)


def srbf_function(shape: ShapeFunction, center, l_max: int | None = None) -> SpectralFunction:
    """Phi_j = phi(. x_j) as a zonal spectral function about x_j."""
    L = shape.l_max_table if l_max is None else l_max
    legendre = harmonic_dims(shape.n, L) * shape.coefficients(L) / sphere_area(shape.n)
    return SpectralFunction.zonal(shape.n, center, legendre)


def native_inner(v: SpectralFunction, w: SpectralFunction, shape: ShapeFunction) -> float:
    """<v, w>_phi = sum_l sum_m v_hat w_hat / phi_hat(l)."""
    if v.n != shape.n or w.n != shape.n:
        raise SpdoInputError(f"native inner product on n={shape.n} given functions on n={v.n}, n={w.n}")
    prods = degree_products(v, w)
    return float(np.sum(prods / shape.coefficients(prods.size - 1)))
