"""Tests for spdo.assembly — zonal matrices, right-hand sides, Cholesky, kernel correction."""
from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from scipy.special import eval_legendre

import spdo.assembly as assembly
from spdo.analysis import dirichlet_g, exact_dirichlet_solution, G_POLE, srbf_spectral_coeffs
from spdo.assembly import (
    DenseSystem,
    Problem,
    build_system,
    cholesky_solve,
    collocation_matrix,
    collocation_rhs,
    entry_weights,
    galerkin_matrix,
    galerkin_rhs,
    kernel_correction,
    select_lmax,
    solve,
    symbol_growth,
    truncation_bound,
)
from spdo.errors import SpdoInputError, SpdoNotPositiveDefiniteError, SpdoTruncationError, SpdoUnisolvencyError
from spdo.kernels import SpectralFunction, ZonalKernel, kernel_eval_series, wendland_shape
from spdo.operators import (
    PointEvaluation,
    UnisolventConstraints,
    apply,
    custom_symbol,
    make_symbol,
    mean_value_functional,
    pair,
)
from spdo.pointsets import fibonacci_points
from spdo.sphcore import harmonic_index, real_harmonics_n3

POLE = np.array([0.0, 0.0, 1.0])


@pytest.fixture(scope="module")
def shape():
    return wendland_shape(3, 200)


def _random_sphere(rng, N):
    x = rng.standard_normal((N, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# ── Matrices ────────────────────────────────────────────


class TestMatrices:
    @pytest.mark.parametrize("name", ["weakly_singular", "identity", "laplace_beltrami", "hypersingular"])
    def test_match_explicit_harmonics(self, shape, name):
        pts = _random_sphere(np.random.default_rng(0), 4)
        l_max = 8
        Y = real_harmonics_n3(l_max, pts)
        degree = np.repeat(np.arange(l_max + 1), 2 * np.arange(l_max + 1) + 1)
        L = make_symbol(name)
        sym, phi = L.values(l_max)[degree], shape.coefficients(l_max)[degree]
        for build, power in ((galerkin_matrix, 2), (collocation_matrix, 1)):
            oracle = (Y * (sym * phi**power)) @ Y.T
            A = build(L, shape, pts, l_max)
            assert np.max(np.abs(A - oracle)) <= 1e-12 * np.max(np.abs(oracle))

    def test_galerkin_is_collocation_with_squared_shape(self, shape):
        X = fibonacci_points(15)
        L = make_symbol("hypersingular")
        np.testing.assert_array_equal(galerkin_matrix(L, shape, X, 60), collocation_matrix(L, shape.squared(), X, 60))

    def test_weakly_singular_diagonal(self, shape):
        X = fibonacci_points(10)
        L = make_symbol("weakly_singular")
        phi = shape.coefficients(100)
        expected = float(np.sum(phi**2)) / (4 * math.pi)
        np.testing.assert_allclose(np.diag(galerkin_matrix(L, shape, X, 100)), expected, rtol=1e-13)
        np.testing.assert_allclose(
            np.diag(collocation_matrix(make_symbol("identity"), shape, X, 100)),
            float(np.sum((2 * np.arange(101) + 1) * phi)) / (4 * math.pi), rtol=1e-13,
        )

    def test_identity_collocation_is_kernel_matrix(self, shape):
        X = fibonacci_points(12)
        A = collocation_matrix(make_symbol("identity"), shape, X, 150)
        expected = kernel_eval_series(shape, np.clip(X.points @ X.points.T, -1, 1), 150)
        np.testing.assert_allclose(A, expected, atol=1e-12)
        # and the closed form agrees to the truncation error
        np.testing.assert_allclose(A, ZonalKernel(shape, X).interpolation_matrix(), atol=2e-2)

    def test_single_point(self, shape):
        A = galerkin_matrix(make_symbol("identity"), shape, POLE[None, :], 40)
        assert A.shape == (1, 1)
        assert A[0, 0] > 0

    def test_exactly_symmetric(self, shape):
        A = galerkin_matrix(make_symbol("weakly_singular"), shape, fibonacci_points(25), 80)
        np.testing.assert_array_equal(A, A.T)

    def test_independent_of_threads_and_chunking(self, shape, monkeypatch):
        X = fibonacci_points(12)
        L = make_symbol("weakly_singular")
        reference = galerkin_matrix(L, shape, X, 50)
        monkeypatch.setattr(assembly, "CHUNK", 7)
        np.testing.assert_array_equal(galerkin_matrix(L, shape, X, 50, threads=4), reference)

    def test_permutation_equivariant(self, shape):
        X = fibonacci_points(9)
        order = np.random.default_rng(3).permutation(9)
        L = make_symbol("laplace_beltrami")
        A = collocation_matrix(L, shape, X, 60)
        B = collocation_matrix(L, shape, X.permuted(order), 60)
        np.testing.assert_allclose(B, A[np.ix_(order, order)], atol=1e-15)

    def test_unknown_method(self, shape):
        with pytest.raises(SpdoInputError, match="Choose from"):
            entry_weights("least_squares", make_symbol("identity"), shape, 10)

    def test_shape_and_symbol_on_different_spheres(self, shape):
        with pytest.raises(SpdoInputError, match="n=4"):
            entry_weights("galerkin", make_symbol("identity", n=4), shape, 10)


# ── Truncation ──────────────────────────────────────────


class TestTruncationBound:
    def test_galerkin_tail_decays(self, shape):
        L = make_symbol("weakly_singular")
        assert truncation_bound(L, shape, 100) / truncation_bound(L, shape, 200) >= 16

    def test_bound_dominates_partial_tail(self, shape):
        L = make_symbol("weakly_singular")
        ls = np.arange(151, 201)
        tail = float(np.sum((2 * ls + 1) / (4 * math.pi) * L.values(200)[ls] * shape.coeffs[ls] ** 2))
        assert tail <= truncation_bound(L, shape, 150)

    def test_divergent_collocation_series(self, shape):
        with pytest.raises(SpdoTruncationError, match="does not converge"):
            truncation_bound(make_symbol("laplace_beltrami"), shape, 100, method="collocation")

    def test_identity_collocation_converges(self, shape):
        assert math.isfinite(truncation_bound(make_symbol("identity"), shape, 100, method="collocation"))

    def test_growth_only_looks_past_lmax(self):
        L = make_symbol("weakly_singular")
        # |L_hat(l)| (l+1) = (l+1)/(2l+1) falls towards 1/2
        assert symbol_growth(L, 0) == pytest.approx(2 / 3)
        assert symbol_growth(L, 60) == pytest.approx(62 / 123)

    def test_growth_reaches_increasing_limit(self):
        L = custom_symbol(0.0, "l/(l+1)", kernel_set=[0])
        assert symbol_growth(L, 10) == pytest.approx(1.0, abs=1e-9)

    def test_growth_sees_symbol_beyond_lmax(self, shape):
        spiky = custom_symbol(0.0, lambda l: np.where(l > 120, 50.0, 1.0), kernel_set=[])
        assert symbol_growth(spiky, 100) == pytest.approx(50.0)
        ratio = truncation_bound(spiky, shape, 100, method="collocation") / truncation_bound(
            make_symbol("identity"), shape, 100, method="collocation"
        )
        assert ratio == pytest.approx(50.0)

    def test_spiky_bound_dominates_partial_tail(self, shape):
        spiky = custom_symbol(0.0, lambda l: np.where(l > 120, 50.0, 1.0), kernel_set=[])
        ls = np.arange(101, 201)
        tail = float(np.sum((2 * ls + 1) / (4 * math.pi) * spiky.values(200)[ls] * shape.coeffs[ls]))
        assert tail <= truncation_bound(spiky, shape, 100, method="collocation")


class TestSelectLmax:
    @staticmethod
    def _ratio(method, L, shape, l_max):
        diagonal = abs(float(np.sum(entry_weights(method, L, shape, l_max))))
        return truncation_bound(L, shape, l_max, method=method) / diagonal

    @pytest.mark.parametrize("method", ["galerkin", "collocation"])
    def test_smallest_lmax_meeting_tolerance(self, method):
        shape = wendland_shape(3, 800)
        L = make_symbol("weakly_singular")
        l_max = select_lmax(method, L, shape, 1e-4)
        assert l_max < 800
        assert self._ratio(method, L, shape, l_max) <= 1e-4
        assert self._ratio(method, L, shape, l_max - 1) > 1e-4

    def test_collocation_needs_more_than_galerkin(self):
        shape = wendland_shape(3, 800)
        L = make_symbol("weakly_singular")
        assert select_lmax("collocation", L, shape, 1e-4) > max(60, select_lmax("galerkin", L, shape, 1e-4))

    def test_cap_when_tolerance_unreachable(self, shape, caplog):
        with caplog.at_level(logging.WARNING, logger="spdo.assembly"):
            l_max = select_lmax("collocation", make_symbol("weakly_singular"), shape, 1e-12)
        assert l_max == shape.l_max_table
        assert "stays above" in caplog.text

    def test_cap_when_series_diverges(self, shape, caplog):
        with caplog.at_level(logging.WARNING, logger="spdo.assembly"):
            l_max = select_lmax("collocation", make_symbol("laplace_beltrami"), shape, 1e-4, cap=120)
        assert l_max == 120
        assert "does not converge" in caplog.text

    def test_solve_picks_lmax(self):
        shape = wendland_shape(3, 800)
        L = make_symbol("weakly_singular")
        X = fibonacci_points(20)
        bundle = solve(Problem("collocation", L, shape, X, exact_dirichlet_solution().g))
        assert bundle.l_max == select_lmax("collocation", L, shape, assembly.DEFAULT_TOLERANCE)
        assert bundle.meta.tail_bound <= assembly.DEFAULT_TOLERANCE * float(np.max(np.diag(bundle.system.matrix)))


# ── Right-hand sides ────────────────────────────────────


class TestRightHandSides:
    def test_zero_data(self, shape):
        b = galerkin_rhs(SpectralFunction.zero(3, 10), shape, fibonacci_points(5), 10)
        np.testing.assert_array_equal(b, np.zeros(5))

    def test_single_harmonic(self, shape):
        X = fibonacci_points(7)
        g = SpectralFunction.from_harmonics({(2, 1): 1.0})
        expected = shape.coeffs[2] * real_harmonics_n3(2, X.points)[:, harmonic_index(2, 1)]
        np.testing.assert_allclose(galerkin_rhs(g, shape, X, 20), expected, atol=1e-15)

    def test_benchmark_galerkin_rhs(self, shape):
        X = fibonacci_points(11)
        g = exact_dirichlet_solution().g
        ls = np.arange(41)
        b_l = -(ls + 1) / (2 * ls + 1) * 0.25**ls
        expected = [np.sum(b_l * shape.coeffs[:41] * eval_legendre(ls, z)) for z in X.points[:, 2]]
        np.testing.assert_allclose(galerkin_rhs(g, shape, X, 40), expected, atol=1e-14)

    def test_galerkin_needs_spectral_data(self, shape):
        with pytest.raises(SpdoInputError, match="spectral"):
            galerkin_rhs(dirichlet_g, shape, fibonacci_points(5), 20)

    def test_collocation_constant(self):
        g = SpectralFunction.general([math.sqrt(4 * math.pi)])
        np.testing.assert_allclose(collocation_rhs(g, fibonacci_points(6)), 1.0, atol=1e-15)

    def test_collocation_benchmark_at_pole(self):
        b = collocation_rhs(exact_dirichlet_solution().g, POLE[None, :], l_max=40)
        assert b[0] == pytest.approx(G_POLE, abs=1e-13)

    def test_collocation_truncation_converged(self):
        X = fibonacci_points(8)
        g60, g120 = exact_dirichlet_solution(60).g, exact_dirichlet_solution(120).g
        np.testing.assert_allclose(collocation_rhs(g60, X), collocation_rhs(g120, X), atol=1e-15)

    def test_collocation_callable_matches_series(self):
        X = fibonacci_points(10)
        np.testing.assert_allclose(
            collocation_rhs(dirichlet_g, X), collocation_rhs(exact_dirichlet_solution().g, X), atol=1e-12
        )

    def test_kernel_component_projected_out(self, shape, caplog):
        X = fibonacci_points(6)
        g = SpectralFunction.from_harmonics({(0, 0): 1.0, (1, 0): 1.0})
        clean = SpectralFunction.from_harmonics({(1, 0): 1.0})
        with caplog.at_level(logging.WARNING, logger="spdo.assembly"):
            b = galerkin_rhs(g, shape, X, 10, kernel_set=frozenset({0}))
        assert "projecting" in caplog.text
        np.testing.assert_allclose(b, galerkin_rhs(clean, shape, X, 10), atol=1e-15)


# ── Systems and Cholesky ────────────────────────────────


class TestBuildSystem:
    def test_records_tail(self, shape):
        system = build_system("galerkin", make_symbol("weakly_singular"), shape, fibonacci_points(10),
                              exact_dirichlet_solution().g, 100)
        assert system.size == 10
        assert system.symmetry_defect() == 0.0
        assert 0 < system.meta.tail_bound < math.inf
        assert system.meta.method == "galerkin"

    def test_divergent_tail_without_tolerance(self, shape):
        L = make_symbol("laplace_beltrami")
        u = exact_dirichlet_solution().u
        system = build_system("collocation", L, shape, fibonacci_points(10), apply(L, u), 100)
        assert system.meta.tail_bound == math.inf

    def test_divergent_tail_with_tolerance(self, shape):
        L = make_symbol("laplace_beltrami")
        with pytest.raises(SpdoTruncationError):
            build_system("collocation", L, shape, fibonacci_points(10), SpectralFunction.zero(3, 5), 100,
                         tolerance=1e-4)

    def test_tail_over_tolerance(self, shape):
        with pytest.raises(SpdoTruncationError, match="raise lmax"):
            build_system("collocation", make_symbol("weakly_singular"), shape, fibonacci_points(10),
                         exact_dirichlet_solution().g, 10, tolerance=1e-12)


class TestCholeskySolve:
    def test_identity(self):
        report = cholesky_solve((np.eye(3), np.array([1.0, 2.0, 3.0])))
        np.testing.assert_allclose(report.c, [1.0, 2.0, 3.0])
        assert report.condition == pytest.approx(1.0)
        assert report.min_pivot == pytest.approx(1.0)

    def test_two_by_two(self):
        report = cholesky_solve((np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0])))
        np.testing.assert_allclose(report.c, [1.0, 1.0], atol=1e-15)
        assert report.residual <= 1e-15

    def test_not_positive_definite(self):
        with pytest.raises(SpdoNotPositiveDefiniteError) as info:
            cholesky_solve((np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2)))
        assert info.value.order == 2
        assert info.value.pivot == pytest.approx(-3.0)

    def test_breakdown_at_first_pivot(self):
        with pytest.raises(SpdoNotPositiveDefiniteError) as info:
            cholesky_solve((np.array([[-1.0, 0.0], [0.0, 1.0]]), np.ones(2)))
        assert info.value.order == 1
        assert info.value.pivot == -1.0

    def test_dimension_mismatch(self):
        with pytest.raises(SpdoInputError, match="right-hand side"):
            cholesky_solve((np.eye(3), np.ones(4)))

    def test_accepts_dense_system(self, shape):
        system = build_system("collocation", make_symbol("weakly_singular"), shape, fibonacci_points(20),
                              exact_dirichlet_solution().g, 100)
        report = cholesky_solve(system)
        assert isinstance(system, DenseSystem)
        assert report.residual <= 1e-10


# ── Solutions and kernel correction ─────────────────────


class TestSolve:
    def test_collocation_interpolates(self, shape):
        X = fibonacci_points(40)
        L = make_symbol("weakly_singular")
        data = exact_dirichlet_solution()
        bundle = solve(Problem("collocation", L, shape, X, data.g, 100))
        approx = apply(L, srbf_spectral_coeffs(bundle.c, shape, X, 100))
        b = collocation_rhs(data.g, X)
        assert np.max(np.abs(approx.evaluate(X.points) - b)) <= 1e-8 * np.linalg.norm(b)

    def test_galerkin_equations_hold(self, shape):
        X = fibonacci_points(40)
        L = make_symbol("weakly_singular")
        bundle = solve(Problem("galerkin", L, shape, X, exact_dirichlet_solution().g, 100))
        A, b = bundle.system.matrix, bundle.system.rhs
        assert np.max(np.abs(A @ bundle.c - b)) <= 1e-8 * np.linalg.norm(b)
        assert bundle.kernel_coeffs == {}
        assert bundle.report.min_pivot > 0

    def test_mean_value_recovers_constant(self, shape):
        L = make_symbol("laplace_beltrami")
        u = SpectralFunction.from_harmonics({(1, 0): 1.0, (0, 0): 0.7})
        mu = mean_value_functional(3)
        constraints = UnisolventConstraints((mu,), (pair(mu, u),))
        X = fibonacci_points(30)
        bundle = solve(Problem("galerkin", L, shape, X, apply(L, u), 100, constraints))
        assert abs(bundle.pairing(mu) - constraints.targets[0]) <= 1e-10
        constant = srbf_spectral_coeffs(bundle.c, shape, X, 100).coeffs[0] + bundle.kernel_coeffs[(0, 0)]
        assert constant == pytest.approx(0.7, abs=1e-9)

    def test_point_constraint(self, shape):
        L = make_symbol("hypersingular")
        data = exact_dirichlet_solution()
        pole = PointEvaluation(POLE)
        constraints = UnisolventConstraints((pole,), (1.3,))
        bundle = solve(Problem("galerkin", L, shape, fibonacci_points(25), apply(L, data.u), 100, constraints))
        assert bundle.evaluate(POLE) == pytest.approx(1.3, abs=1e-10)
        assert isinstance(bundle.evaluate(POLE), float)

    def test_no_constraints_for_injective_operator(self, shape):
        out = kernel_correction(UnisolventConstraints(), make_symbol("identity"), np.ones(3), shape,
                                fibonacci_points(3), 20)
        assert out == {}

    def test_missing_constraints(self, shape):
        L = make_symbol("laplace_beltrami")
        u = exact_dirichlet_solution().u
        with pytest.raises(SpdoUnisolvencyError):
            solve(Problem("galerkin", L, shape, fibonacci_points(10), apply(L, u), 60))

    def test_warns_outside_theory(self, shape, caplog):
        L = make_symbol("laplace_beltrami")
        mu = mean_value_functional(3)
        u = exact_dirichlet_solution().u
        with caplog.at_level(logging.WARNING, logger="spdo.assembly"):
            solve(Problem("collocation", L, shape, fibonacci_points(10), apply(L, u), 60,
                          UnisolventConstraints((mu,), (pair(mu, u),))))
        assert "outside the proven convergence range" in caplog.text
