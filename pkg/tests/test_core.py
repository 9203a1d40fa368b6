import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ettrack.core import (ComparisonFunction, LevelSetSpec, LyapunovCertificate, QuadraticLyapunov, as_vec,
                          radius_for_ultimate_bound, solve_lyapunov_equation, ultimate_bound)
from ettrack.errors import DimensionMismatch, NonHurwitz
from ettrack.systems import SPRING_B

ATILDE = np.array([[0.0, 1.0], [-20.0, -21.0]])


def lyap2_by_hand(A, H):
    """Independent oracle: the three scalar equations of the symmetric 2x2 Lyapunov system."""
    (a, b), (c, d) = A
    # unknowns p11, p12, p22
    M = np.array([
        [2 * a, 2 * c, 0.0],
        [b, a + d, c],
        [0.0, 2 * b, 2 * d],
    ])
    rhs = -np.array([H[0][0], H[0][1], H[1][1]])
    p11, p12, p22 = np.linalg.solve(M, rhs)
    return np.array([[p11, p12], [p12, p22]])


class TestLyapunovEquation:
    def test_benchmark_matrix(self):
        P = solve_lyapunov_equation(ATILDE, np.eye(2))
        oracle = lyap2_by_hand(ATILDE, np.eye(2))
        np.testing.assert_allclose(oracle, [[1.025, 0.025], [0.025, 0.025]], rtol=1e-12)
        np.testing.assert_allclose(P, oracle, rtol=1e-12)
        resid = P @ ATILDE + ATILDE.T @ P + np.eye(2)
        assert np.linalg.norm(resid, "fro") <= 1e-9 * np.linalg.norm(np.eye(2), "fro")

    def test_negative_identity(self):
        np.testing.assert_allclose(solve_lyapunov_equation(-np.eye(2), np.eye(2)), 0.5 * np.eye(2), atol=1e-15)

    def test_decoupled(self):
        P = solve_lyapunov_equation(np.diag([-1.0, -2.0]), np.eye(2))
        np.testing.assert_allclose(P, np.diag([0.5, 0.25]), atol=1e-15)

    def test_non_hurwitz_reports_eigenvalue(self):
        with pytest.raises(NonHurwitz) as exc:
            solve_lyapunov_equation(np.array([[0.0, 1.0], [2.0, -1.0]]), np.eye(2))
        assert exc.value.eigenvalue == pytest.approx(1.0)

    def test_marginal_is_rejected(self):
        with pytest.raises(NonHurwitz):
            solve_lyapunov_equation(np.array([[0.0, 1.0], [0.0, -1.0]]), np.eye(2))

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_random_hurwitz(self, n, seed):
        rng = np.random.default_rng(seed)
        G = rng.standard_normal((n, n))
        S = rng.standard_normal((n, n))
        A = -(G @ G.T + 0.1 * np.eye(n)) + (S - S.T)
        W = rng.standard_normal((n, n))
        H = W @ W.T + np.eye(n)
        P = solve_lyapunov_equation(A, H)
        resid = P @ A + A.T @ P + H
        assert np.linalg.norm(resid, "fro") <= 1e-9 * np.linalg.norm(H, "fro")
        np.testing.assert_array_equal(P, P.T)
        assert np.linalg.eigvalsh(P)[0] > 0


class TestComparisonFunctions:
    grid = np.logspace(-6, 4, 100)

    @pytest.mark.parametrize("fn", [
        ComparisonFunction.power_law(2.0, 2),
        ComparisonFunction.power_law(0.3, 1.5),
        ComparisonFunction.tabulated([0, 1, 2, 5], [0, 1, 3, 10]),
        ComparisonFunction.from_callable(lambda s: s**3 + s),
        ComparisonFunction.from_callable(lambda s: math.log1p(s) + s * s),
    ], ids=["square", "power1.5", "table", "cubic", "log-mixed"])
    def test_round_trip(self, fn):
        for s in self.grid:
            assert fn.inverse(fn(s)) == pytest.approx(s, rel=1e-10)

    @pytest.mark.parametrize("fn", [
        ComparisonFunction.power_law(1.0, 3),
        ComparisonFunction.tabulated([0, 0.5, 3], [0, 2, 4]),
        ComparisonFunction.from_callable(lambda s: s / (1 + s) + s),
    ])
    def test_class_k_infinity(self, fn):
        vals = np.array([fn(s) for s in np.r_[0.0, self.grid]])
        assert vals[0] == 0
        assert np.all(np.diff(vals) > 0)
        assert fn(1e6) > 1e5

    def test_invalid_table(self):
        with pytest.raises(ValueError):
            ComparisonFunction.tabulated([0, 1, 1], [0, 1, 2])
        with pytest.raises(ValueError):
            ComparisonFunction.tabulated([1, 2], [0, 1])


class TestUltimateBound:
    def test_identity(self):
        a = ComparisonFunction.power_law(3.0, 2)
        assert ultimate_bound(0.7, a, a) == pytest.approx(0.7, rel=1e-15)

    def test_power_law(self):
        assert ultimate_bound(1.0, ComparisonFunction.power_law(1, 2), ComparisonFunction.power_law(4, 2)) == 2.0

    def test_benchmark_value(self):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)
        assert cert.condition == pytest.approx(42.08, abs=5e-3)
        assert ultimate_bound(0.0154, cert.alpha1, cert.alpha2) == pytest.approx(0.1, abs=1e-3)

    @given(st.floats(1e-4, 1e3))
    def test_quadratic_paths_agree(self, r):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)
        generic = ultimate_bound(r, cert.alpha1, cert.alpha2)
        closed = r * math.sqrt(cert.lambda_max / cert.lambda_min)
        assert generic == pytest.approx(closed, rel=1e-12)
        assert generic >= r

    @given(st.floats(1e-3, 10.0))
    def test_radius_inverse(self, r1):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)
        r = radius_for_ultimate_bound(r1, cert.alpha1, cert.alpha2)
        assert ultimate_bound(r, cert.alpha1, cert.alpha2) == pytest.approx(r1, rel=1e-10)

    def test_rejects_nonpositive(self):
        a = ComparisonFunction.power_law(1, 2)
        with pytest.raises(ValueError):
            ultimate_bound(0.0, a, a)


class TestQuadraticCertificate:
    @pytest.fixture
    def cert(self):
        return QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)

    def test_derived_constants(self, cert):
        assert cert.a == 1.0
        assert cert.normPB == pytest.approx(0.025 * math.sqrt(2), rel=1e-12)
        assert cert.beta(1.0) == pytest.approx(2 * 0.025 * math.sqrt(2), rel=1e-12)

    def test_sandwich(self, cert, rng):
        for x in rng.standard_normal((1000, 2)) * rng.uniform(0, 10, (1000, 1)):
            s = np.linalg.norm(x)
            V = cert.value(x)
            assert cert.alpha1(s) <= V * (1 + 1e-12) + 1e-300
            assert V <= cert.alpha2(s) * (1 + 1e-12)

    def test_gradient_finite_differences(self, cert, rng):
        h = 1e-6
        for x in rng.uniform(-5, 5, (200, 2)):
            fd = np.array([(cert.value(x + h * ei) - cert.value(x - h * ei)) / (2 * h) for ei in np.eye(2)])
            np.testing.assert_allclose(cert.gradient(x), fd, rtol=1e-6, atol=1e-9)

    def test_absorbed_envelope_bounds_input_direction(self, cert, rng):
        # with B folded in, beta bounds |dV/dx . B|, the only direction the control perturbs
        R = 2.0
        xs = rng.standard_normal((1000, 2))
        xs *= (R * rng.random((1000, 1))) / np.linalg.norm(xs, axis=1, keepdims=True)
        proj = np.abs(np.array([cert.gradient(x) @ SPRING_B[:, 0] for x in xs]))
        assert np.all(cert.beta(R) >= proj)

    def test_plain_envelope_bounds_gradient(self, rng):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B, absorb_input=False)
        R = 2.0
        xs = rng.standard_normal((1000, 2))
        xs *= (R * rng.random((1000, 1))) / np.linalg.norm(xs, axis=1, keepdims=True)
        grads = np.linalg.norm([cert.gradient(x) for x in xs], axis=1)
        assert np.all(cert.beta(R) >= grads)
        # and on the boundary the bound is attained along the top eigenvector
        w, U = np.linalg.eigh(cert.P)
        assert np.linalg.norm(cert.gradient(R * U[:, -1])) == pytest.approx(cert.beta(R), rel=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            QuadraticLyapunov(np.diag([1.0, -1.0]), np.eye(2))

    def test_generic_threshold_matches_quadratic(self, cert):
        generic = LyapunovCertificate(cert.value, cert.gradient, cert.alpha1, cert.alpha2, cert.alpha3, cert.beta)
        for s in (0.01, 0.5, 3.0):
            assert generic.threshold(s, 0.95) == pytest.approx(cert.threshold(s, 0.95), rel=1e-12)


class TestLevelSet:
    def test_membership_monotone(self, rng):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)
        for _ in range(500):
            R1, R2 = sorted(rng.uniform(0, 3, 2))
            x = rng.uniform(-10, 10, 2)
            w = rng.uniform(-1, 1, 3)
            if LevelSetSpec(R1, 2.5).contains(cert, x, w):
                assert LevelSetSpec(R2, 2.5).contains(cert, x, w)

    def test_excludes_large_reference(self):
        cert = QuadraticLyapunov.from_closed_loop(ATILDE, np.eye(2), B=SPRING_B)
        assert not LevelSetSpec(1.0, 1.0).contains(cert, np.zeros(2), [1.0, 1.0, 0.0])


def test_as_vec():
    v = as_vec([1, 2, 3], 3)
    assert v.dtype == float and not v.flags.writeable
    with pytest.raises(DimensionMismatch):
        as_vec([1, 2], 3)
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
