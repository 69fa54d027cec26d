"""Tests for spdo.operators — symbols, ellipticity, constraint functionals."""
from __future__ import annotations

import math

import numpy as np
import pytest

from spdo.errors import SpdoEllipticityError, SpdoInputError, SpdoUnisolvencyError
from spdo.kernels import SpectralFunction, wendland_shape
from spdo.operators import (
    PointEvaluation,
    UnisolventConstraints,
    apply,
    bilinear_a,
    custom_symbol,
    ellipticity_scan,
    functional_on_harmonics,
    make_symbol,
    mean_value_functional,
    pair,
    parse_symbol_expression,
    theory_conditions,
)


def _off_kernel(L, v):
    """v with its components on K(L) removed."""
    keep = np.ones(v.l_max + 1)
    for l in L.kernel_set:
        keep[l] = 0.0
    return v.scaled_by_degree(keep)


# ── Built-in symbols ────────────────────────────────────


class TestMakeSymbol:
    def test_weakly_singular(self):
        S = make_symbol("weakly_singular")
        assert S(0) == 1.0
        assert S(3) == pytest.approx(1 / 7)
        assert S.order == -1.0
        assert S.kernel_dim == 0

    def test_hypersingular(self):
        H = make_symbol("hypersingular")
        assert H(0) == 0.0
        assert H(2) == pytest.approx(6 / 5)
        assert H.kernel_set == frozenset({0})

    def test_laplace_beltrami(self):
        L = make_symbol("laplace_beltrami")
        assert L(1) == 2.0
        assert L(4) == 20.0
        assert L.kernel_dim == 1
        assert L.alpha == 1.0

    def test_double_layer(self):
        assert make_symbol("double_layer")(0) == pytest.approx(-0.5)

    def test_identity(self):
        np.testing.assert_array_equal(make_symbol("identity").values(5), np.ones(6))

    def test_laplace_beltrami_on_s3(self):
        L = make_symbol("laplace_beltrami", n=4)
        assert L(1) == 3.0
        assert L.kernel_dim == 1

    def test_unknown_name(self):
        with pytest.raises(SpdoInputError, match="Choose from"):
            make_symbol("biharmonic")

    def test_custom_needs_order_and_expression(self):
        with pytest.raises(SpdoInputError, match="order"):
            make_symbol("custom", fn="l")

    def test_negative_degree(self):
        with pytest.raises(SpdoInputError):
            make_symbol("identity")(-1)


# ── Expressions and custom symbols ──────────────────────


class TestParseSymbolExpression:
    def test_rational(self):
        fn = parse_symbol_expression("l*(l+1)/(2*l+1)")
        assert fn(np.array([3.0]))[0] == pytest.approx(12 / 7)

    def test_negative_integer_exponent(self):
        fn = parse_symbol_expression("(l+1)**-1")
        assert fn(np.array([1.0]))[0] == pytest.approx(0.5)

    def test_constant(self):
        np.testing.assert_array_equal(parse_symbol_expression("2")(np.arange(3.0)), [2.0, 2.0, 2.0])

    @pytest.mark.parametrize(
        "text",
        ["l**0.5", "__import__('os')", "x + 1", "l if l else 1", "abs(l)", "l.real"],
    )
    def test_rejected(self, text):
        with pytest.raises(SpdoInputError):
            parse_symbol_expression(text)

    def test_syntax_error(self):
        with pytest.raises(SpdoInputError, match="cannot parse"):
            parse_symbol_expression("l +")

    def test_dimension_name(self):
        fn = parse_symbol_expression("l*(l+n-2)", n=4)
        np.testing.assert_allclose(fn(np.arange(6.0)), make_symbol("laplace_beltrami", 4).values(5))

    def test_script_ell(self):
        assert parse_symbol_expression("1/(2*ℓ+1)")(np.array([2.0]))[0] == pytest.approx(0.2)

    def test_fractional_constants_are_exact(self):
        assert parse_symbol_expression("l/3 + 1/2")(np.array([3.0]))[0] == pytest.approx(1.5)

    @pytest.mark.parametrize("text", ["l, l", "l(2)", "2**l"])
    def test_not_a_rational_function(self, text):
        with pytest.raises(SpdoInputError):
            parse_symbol_expression(text)


class TestCustomSymbol:
    def test_kernel_found_by_scan(self):
        L = custom_symbol(2.0, "l*(l+1)")
        assert L.kernel_set == frozenset({0})
        assert L(3) == 12.0

    def test_explicit_kernel_set(self):
        L = custom_symbol(2.0, "l*(l+1)", kernel_set=[0])
        assert L.kernel_dim == 1

    def test_infinite_kernel_rejected(self):
        with pytest.raises(SpdoEllipticityError, match="infinite"):
            custom_symbol(0.0, lambda l: np.where(l % 2 == 0, 0.0, 1.0))

    def test_non_finite_rejected(self):
        with pytest.raises(SpdoInputError, match="not finite"):
            custom_symbol(-2.0, "1/l")

    def test_matches_builtin(self):
        H = custom_symbol(1.0, "l*(l+1)/(2*l+1)")
        np.testing.assert_allclose(H.values(50), make_symbol("hypersingular").values(50), rtol=1e-15)


# ── Action, ellipticity, bilinear form ──────────────────


class TestApply:
    def test_identity_leaves_function_alone(self):
        v = SpectralFunction.random_band_limited(5, np.random.default_rng(0))
        np.testing.assert_array_equal(apply(make_symbol("identity"), v).coeffs, v.coeffs)

    def test_single_degree(self):
        v = SpectralFunction.from_harmonics({(2, 1): 1.0})
        assert apply(make_symbol("weakly_singular"), v).coefficient(2, 1) == pytest.approx(1 / 5)

    def test_kernel_components_vanish(self):
        v = SpectralFunction.from_harmonics({(0, 0): 3.0, (1, 0): 1.0})
        out = apply(make_symbol("laplace_beltrami"), v)
        assert out.coefficient(0, 0) == 0.0
        assert out.coefficient(1, 0) == 2.0

    def test_wrong_sphere(self):
        with pytest.raises(SpdoInputError, match="lives on"):
            apply(make_symbol("identity", n=4), SpectralFunction.zero(3, 2))


class TestEllipticity:
    def test_weakly_singular(self):
        c1, c2 = ellipticity_scan(make_symbol("weakly_singular"), 100)
        assert c1 == pytest.approx(101 / 201)
        assert c2 == 1.0

    def test_laplace_beltrami_skips_kernel(self):
        c1, c2 = ellipticity_scan(make_symbol("laplace_beltrami"), 100)
        assert c1 == pytest.approx(0.5)
        assert c2 == pytest.approx(100 / 101)

    def test_identity(self):
        assert ellipticity_scan(make_symbol("identity"), 20) == (1.0, 1.0)

    def test_double_layer_is_not_elliptic(self):
        with pytest.raises(SpdoEllipticityError):
            ellipticity_scan(make_symbol("double_layer"), 20)

    def test_scan_too_short(self):
        with pytest.raises(SpdoInputError, match="l_max >= 10"):
            ellipticity_scan(make_symbol("identity"), 5)


class TestBilinearForm:
    @pytest.mark.parametrize("name", ["weakly_singular", "hypersingular", "laplace_beltrami", "identity"])
    def test_coercive_and_bounded(self, name):
        L = make_symbol(name)
        c1, c2 = ellipticity_scan(L, 30)
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = _off_kernel(L, SpectralFunction.random_band_limited(30, rng))
            w = _off_kernel(L, SpectralFunction.random_band_limited(30, rng))
            a_vv = bilinear_a(L, v, v)
            norm_sq = v.sobolev_norm(L.alpha) ** 2
            assert c1 * norm_sq * (1 - 1e-12) <= a_vv <= c2 * norm_sq * (1 + 1e-12)
            s = rng.uniform(-1, 1)
            bound = c2 * w.sobolev_norm(L.alpha + s) * v.sobolev_norm(L.alpha - s)
            assert abs(bilinear_a(L, w, v)) <= bound * (1 + 1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        v = SpectralFunction.random_band_limited(8, rng)
        w = SpectralFunction.random_band_limited(8, rng)
        L = make_symbol("hypersingular")
        assert bilinear_a(L, v, w) == pytest.approx(bilinear_a(L, w, v), rel=1e-14)

    def test_constant(self):
        v = SpectralFunction.general([2.0])
        assert bilinear_a(make_symbol("weakly_singular"), v, v) == pytest.approx(4.0)


# ── Functionals and constraints ─────────────────────────


class TestFunctionals:
    def test_mean_of_zonal_constant(self):
        u = SpectralFunction.zonal(3, [0.0, 0.0, 1.0], [5.0])
        assert pair(mean_value_functional(), u) == pytest.approx(5.0)

    def test_mean_of_general_constant(self):
        u = SpectralFunction.general([2.0])
        assert pair(mean_value_functional(), u) == pytest.approx(2.0 / math.sqrt(4 * math.pi))

    def test_mean_ignores_higher_degrees(self):
        u = SpectralFunction.from_harmonics({(0, 0): 1.0, (3, 2): 4.0})
        assert pair(mean_value_functional(), u) == pytest.approx(1 / math.sqrt(4 * math.pi))

    def test_point_evaluation(self):
        u = SpectralFunction.from_harmonics({(1, 0): 1.0})
        pole = PointEvaluation(np.array([0.0, 0.0, 1.0]))
        assert pair(pole, u) == pytest.approx(math.sqrt(3 / (4 * math.pi)))

    def test_mean_value_on_constant_harmonic(self):
        values = functional_on_harmonics(mean_value_functional(), 3, [0])
        assert values[0] == pytest.approx(1 / math.sqrt(4 * math.pi))


class TestUnisolventConstraints:
    def test_count_must_match_targets(self):
        with pytest.raises(SpdoInputError, match="target"):
            UnisolventConstraints((mean_value_functional(),), ())

    def test_count_must_match_kernel(self):
        with pytest.raises(SpdoUnisolvencyError, match="dimension 1"):
            UnisolventConstraints().matrix(make_symbol("laplace_beltrami"))

    def test_empty_for_injective_operator(self):
        assert UnisolventConstraints().matrix(make_symbol("weakly_singular")).shape == (0, 0)

    def test_mean_value_is_unisolvent(self):
        B = UnisolventConstraints((mean_value_functional(),), (0.0,)).matrix(make_symbol("laplace_beltrami"))
        assert B.shape == (1, 1)
        assert B[0, 0] == pytest.approx(1 / math.sqrt(4 * math.pi))

    def test_three_axes_pin_degree_one(self):
        L = custom_symbol(2.0, "(l-1)**2")
        assert L.kernel_set == frozenset({1})
        mus = tuple(PointEvaluation(e) for e in np.eye(3))
        assert UnisolventConstraints(mus, (0.0, 0.0, 0.0)).matrix(L).shape == (3, 3)

    def test_repeated_point_is_not_unisolvent(self):
        L = custom_symbol(2.0, "(l-1)**2")
        mus = tuple(PointEvaluation(np.array([0.0, 0.0, 1.0])) for _ in range(3))
        with pytest.raises(SpdoUnisolvencyError, match="not unisolvent"):
            UnisolventConstraints(mus, (0.0, 0.0, 0.0)).matrix(L)


class TestTheoryConditions:
    def test_weakly_singular_with_wendland(self):
        shape = wendland_shape(3, 20)
        assert theory_conditions(make_symbol("weakly_singular"), shape) == (True, True)

    def test_laplace_beltrami_collocation_uncovered(self):
        shape = wendland_shape(3, 20)
        conditions = theory_conditions(make_symbol("laplace_beltrami"), shape)
        assert conditions.galerkin
        assert not conditions.collocation
