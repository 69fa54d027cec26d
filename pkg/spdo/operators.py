"""Pseudodifferential operators on the sphere as spectral symbols.

An operator L acts diagonally on spherical harmonics, L Y_{l,m} = L_hat(l) Y_{l,m}.
A symbol is a pure function of l together with its finite zero set K(L);
the harmonics of degrees in K(L) span ker L.
"""
from __future__ import annotations

import io
import logging
import math
import tokenize
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import auto_number, parse_expr

from .errors import SpdoEllipticityError, SpdoInputError, SpdoUnisolvencyError
from .kernels import ShapeFunction, SpectralFunction, degree_products
from .sphcore import _check_dim, _unit_rows, harmonic_basis, harmonic_dim, sphere_area

log = logging.getLogger("spdo.operators")

SYMBOL_NAMES = ("laplace_beltrami", "hypersingular", "weakly_singular", "double_layer", "identity", "custom")
ZERO_TOL = 1e-12
DEFAULT_SCAN = 1000


@dataclass(frozen=True, eq=False)
class SpectralSymbol:
    """L_hat(l) with its order 2*alpha and kernel index set K(L).

    ``fn`` takes a float array of degrees. Values on ``kernel_set`` are
    always returned as exact zeros.
    """

    name: str
    order: float
    fn: Callable[[np.ndarray], np.ndarray]
    kernel_set: frozenset[int] = field(default_factory=frozenset)
    n: int = 3

    def __post_init__(self) -> None:
        _check_dim(self.n)
        object.__setattr__(self, "kernel_set", frozenset(int(l) for l in self.kernel_set))

    @property
    def alpha(self) -> float:
        return self.order / 2.0

    @property
    def kernel_dim(self) -> int:
        """M = sum of N(n, l) over l in K(L)."""
        return sum(harmonic_dim(self.n, l) for l in self.kernel_set)

    def values(self, l_max: int) -> np.ndarray:
        """L_hat(0..l_max)."""
        ls = np.arange(l_max + 1, dtype=float)
        vals = np.asarray(self.fn(ls), dtype=float) * np.ones_like(ls)
        for l in self.kernel_set:
            if l <= l_max:
                vals[l] = 0.0
        return vals

    def __call__(self, l: int) -> float:
        if l < 0:
            raise SpdoInputError(f"degree l={l} must be >= 0")
        return float(self.values(l)[l])


# ── Construction ────────────────────────────────────────


DEGREE, DIMENSION = sp.symbols("l n")
_SYMBOL_NAMES = {"l": DEGREE, "n": DIMENSION}
# parse_expr evaluates generated code; only the number constructors are reachable
_PARSE_GLOBALS = {"__builtins__": {}, "Integer": sp.Integer, "Float": sp.Float, "Rational": sp.Rational}


def _names(source: str) -> set[str]:
    readline = io.StringIO(source).readline
    return {tok.string for tok in tokenize.generate_tokens(readline) if tok.type == tokenize.NAME}


def symbol_expression(text: str, n: int = 3) -> sp.Expr:
    """Parse ``text`` into a sympy rational function of ``l`` (``ℓ`` and the dimension ``n`` allowed)."""
    source = text.strip().replace("ℓ", "l")
    try:
        unknown = _names(source) - _SYMBOL_NAMES.keys()
    except (SyntaxError, tokenize.TokenError) as exc:
        raise SpdoInputError(f"cannot parse symbol expression {text!r}: {exc}") from None
    if unknown:
        raise SpdoInputError(
            f"unknown name(s) {', '.join(sorted(unknown))} in symbol expression {text!r} (only 'l' and 'n')"
        )
    try:
        expr = parse_expr(source, local_dict=dict(_SYMBOL_NAMES), global_dict=dict(_PARSE_GLOBALS),
                          transformations=(auto_number,))
    except (SyntaxError, tokenize.TokenError) as exc:
        raise SpdoInputError(f"cannot parse symbol expression {text!r}: {exc}") from None
    except (TypeError, ValueError, AttributeError, sp.SympifyError) as exc:
        raise SpdoInputError(f"symbol expression {text!r} is not allowed: {exc}") from None

    if not isinstance(expr, sp.Expr):
        raise SpdoInputError(f"symbol expression {text!r} is not a single expression")
    expr = expr.subs(DIMENSION, n)
    if expr.atoms(sp.Function) or not expr.is_rational_function(DEGREE):
        raise SpdoInputError(f"symbol expression {text!r} must be rational in l (integer powers only)")
    return expr


def parse_symbol_expression(text: str, n: int = 3) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a rational expression in ``l`` into a vectorised symbol.

    e.g. ``l*(l+1)/(2*l+1)``, ``(l+1)**-1`` or ``1/(2*l+n-2)``.
    """
    compiled = sp.lambdify(DEGREE, symbol_expression(text, n), "numpy")

    def fn(l: np.ndarray) -> np.ndarray:
        l = np.asarray(l, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(compiled(l), dtype=float) * np.ones_like(l)

    return fn


def custom_symbol(
    order: float,
    fn: Callable[[np.ndarray], np.ndarray] | str,
    *,
    n: int = 3,
    name: str = "custom",
    kernel_set: Sequence[int] | None = None,
    scan: int = DEFAULT_SCAN,
) -> SpectralSymbol:
    """A user symbol of order 2*alpha = ``order``.

    Without an explicit ``kernel_set`` the zeros are found by scanning
    l = 0..scan for |L_hat(l)| <= 1e-12 (l+1)^order. Zeros found in the upper
    half of the scan are taken as a sign of an infinite kernel and rejected.
    The scan cannot see zeros beyond ``scan``.
    """
    if isinstance(fn, str):
        fn = parse_symbol_expression(fn, n)
    ls = np.arange(scan + 1, dtype=float)
    vals = np.asarray(fn(ls), dtype=float) * np.ones_like(ls)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise SpdoInputError(f"symbol '{name}' is not finite at l={int(bad[0])}")
    if kernel_set is None:
        zeros = np.flatnonzero(np.abs(vals) <= ZERO_TOL * (ls + 1.0) ** order)
        if zeros.size and zeros[-1] > scan // 2:
            raise SpdoEllipticityError(
                f"symbol '{name}' vanishes at l={int(zeros[-1])} (scan to {scan}); "
                "its kernel looks infinite, which is not supported"
            )
        kernel_set = [int(z) for z in zeros]
        if kernel_set:
            log.debug("Symbol '%s': kernel degrees %s found by scan.", name, kernel_set)
    return SpectralSymbol(name=name, order=float(order), fn=fn, kernel_set=frozenset(kernel_set), n=n)


def make_symbol(
    name: str,
    n: int = 3,
    *,
    order: float | None = None,
    fn: Callable[[np.ndarray], np.ndarray] | str | None = None,
) -> SpectralSymbol:
    """Built-in symbols on S^(n-1); ``custom`` needs ``order`` and ``fn``."""
    _check_dim(n)
    m = n - 2
    if name == "weakly_singular":
        return SpectralSymbol(name, -1.0, lambda l: 1.0 / (2.0 * l + m), n=n)
    if name == "hypersingular":
        return SpectralSymbol(name, 1.0, lambda l: l * (l + m) / (2.0 * l + m), frozenset({0}), n=n)
    if name == "laplace_beltrami":
        # negated, so the symbol is the non-negative eigenvalue l(l + n - 2)
        return SpectralSymbol(name, 2.0, lambda l: l * (l + m), frozenset({0}), n=n)
    if name == "double_layer":
        return SpectralSymbol(name, -1.0, lambda l: -m / (2.0 * (2.0 * l + m)), n=n)
    if name == "identity":
        return SpectralSymbol(name, 0.0, lambda l: np.ones_like(l), n=n)
    if name == "custom":
        if order is None or fn is None:
            raise SpdoInputError("custom symbol needs both an order and an expression")
        return custom_symbol(order, fn, n=n)
    raise SpdoInputError(f"unknown operator '{name}'. Choose from: {', '.join(SYMBOL_NAMES)}")


# ── Spectral action ─────────────────────────────────────


class Ellipticity(NamedTuple):
    c1: float
    c2: float


def _check_sphere(L: SpectralSymbol, *functions: SpectralFunction) -> None:
    for v in functions:
        if v.n != L.n:
            raise SpdoInputError(f"symbol '{L.name}' lives on n={L.n}, function on n={v.n}")


def apply(L: SpectralSymbol, v: SpectralFunction) -> SpectralFunction:
    """Lv = sum L_hat(l) v_hat[l, m] Y_{l,m}; coefficients on K(L) come out zero."""
    _check_sphere(L, v)
    return v.scaled_by_degree(L.values(v.l_max))


def ellipticity_scan(L: SpectralSymbol, l_max: int) -> Ellipticity:
    """min/max of L_hat(l) / (l+1)^(2 alpha) over l <= l_max outside K(L)."""
    if l_max < 10:
        raise SpdoInputError(f"ellipticity scan needs l_max >= 10, got {l_max}")
    ls = np.array([l for l in range(l_max + 1) if l not in L.kernel_set])
    ratios = L.values(l_max)[ls] / (ls + 1.0) ** L.order
    c1, c2 = float(ratios.min()), float(ratios.max())
    if c1 <= 0.0:
        worst = int(ls[np.argmin(ratios)])
        raise SpdoEllipticityError(
            f"symbol '{L.name}' is not strongly elliptic: L_hat({worst}) / (l+1)^{L.order:g} = {c1:.3g} <= 0"
        )
    return Ellipticity(c1=c1, c2=c2)


def bilinear_a(L: SpectralSymbol, w: SpectralFunction, v: SpectralFunction) -> float:
    """a(w, v) = <Lw, v> = sum_l L_hat(l) sum_m w_hat v_hat."""
    _check_sphere(L, w, v)
    prods = degree_products(w, v)
    return float(np.sum(L.values(prods.size - 1) * prods))


# ── Constraints for ker L ───────────────────────────────


@dataclass(frozen=True, eq=False)
class PointEvaluation:
    """mu(v) = v(point)."""

    point: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", _unit_rows(self.point)[0])

    @property
    def n(self) -> int:
        return self.point.size


Functional = Union[SpectralFunction, PointEvaluation]


def mean_value_functional(n: int = 3) -> SpectralFunction:
    """mu(v) = (1/omega_n) * integral of v, as the constant 1/omega_n."""
    _check_dim(n)
    axis = np.zeros(n)
    axis[-1] = 1.0
    return SpectralFunction.zonal(n, axis, [1.0 / sphere_area(n)])


def functional_on_harmonics(mu: Functional, n: int, degrees: Sequence[int]) -> np.ndarray:
    """<mu, Y_{l,m}> for the orthonormal harmonics of the given degrees."""
    degs = sorted(set(degrees))
    if isinstance(mu, PointEvaluation):
        values, _ = harmonic_basis(n, degs, mu.point)
        return values[0]
    if mu.n != n:
        raise SpdoInputError(f"functional lives on n={mu.n}, operator on n={n}")
    out: list[float] = []
    for l in degs:
        if l == 0 and mu.mode == "zonal":
            out.append(float(mu.coeffs[0]) * math.sqrt(sphere_area(n)))
            continue
        out.extend(mu.coefficient(l, m) for m in range(-l, l + 1))
    return np.array(out)


def pair(mu: Functional, v: SpectralFunction) -> float:
    """<mu, v> for a truncated spectral function v."""
    if isinstance(mu, PointEvaluation):
        return float(v.evaluate(mu.point))
    return float(np.sum(degree_products(mu, v)))


@dataclass(frozen=True, eq=False)
class UnisolventConstraints:
    """Functionals mu_1..mu_M with targets gamma_1..gamma_M fixing the ker L part."""

    functionals: tuple[Functional, ...] = ()
    targets: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "functionals", tuple(self.functionals))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if len(self.functionals) != len(self.targets):
            raise SpdoInputError(
                f"{len(self.functionals)} constraint functional(s) but {len(self.targets)} target(s)"
            )

    def __len__(self) -> int:
        return len(self.functionals)

    def matrix(self, L: SpectralSymbol) -> np.ndarray:
        """[<mu_i, Y_k>] over the orthonormal basis of ker L, checked for invertibility."""
        if len(self) != L.kernel_dim:
            raise SpdoUnisolvencyError(
                f"operator '{L.name}' has a kernel of dimension {L.kernel_dim}, "
                f"but {len(self)} constraint(s) were given"
            )
        if not len(self):
            return np.empty((0, 0))
        B = np.vstack([functional_on_harmonics(mu, L.n, sorted(L.kernel_set)) for mu in self.functionals])
        cond = np.linalg.cond(B)
        if not np.isfinite(cond) or cond > 1e12:
            raise SpdoUnisolvencyError(
                f"constraints are not unisolvent on ker '{L.name}' (condition number {cond:.3g})"
            )
        log.debug("Constraint matrix for '%s': %dx%d, cond=%.3g.", L.name, B.shape[0], B.shape[1], cond)
        return B


class TheoryConditions(NamedTuple):
    galerkin: bool
    collocation: bool


def theory_conditions(L: SpectralSymbol, shape: ShapeFunction) -> TheoryConditions:
    """Sufficient conditions on tau for the Galerkin and collocation error bounds.

    Galerkin: tau > (alpha + (n-1)/2) / 2.  Collocation: max(2 alpha, alpha) + (n-1)/2 < tau.
    """
    a, half = L.alpha, (L.n - 1) / 2
    return TheoryConditions(
        galerkin=shape.tau > 0.5 * (a + half),
        collocation=max(2.0 * a, a) + half < shape.tau,
    )
