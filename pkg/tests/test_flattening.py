import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wparab.errors import GateFailed
from wparab.experiments import fit_loglog_slope
from wparab.flattening import (
    BoundaryChart,
    b_matrix,
    b_norm_delta_sweep,
    inclusion_audit,
    oscillation_delta_sweep,
    phi_inverse,
    phi_map,
    pushforward_coefficients,
    pushforward_weight_audit,
)
from wparab.weights import BallFamily, Weight, WeightContext

DOM2 = ((-1.0, 1.0), (-1.0, 1.0))
CTX2 = WeightContext(n=2, M0=10.0)


class TestChart:
    def test_zero_chart_is_identity(self):
        chart = BoundaryChart(kind="affine", delta=0.0)
        pts = np.array([[0.3, -0.2], [1.0, 1.0]])
        assert np.allclose(phi_map(chart, pts), pts)
        assert np.allclose(phi_inverse(chart, pts), pts)

    def test_affine_direct_substitution(self):
        chart = BoundaryChart(kind="affine", delta=0.25)
        out = phi_map(chart, np.array([[1.0, 1.0]]))
        assert np.allclose(out, [[1.0, 0.75]])

    @settings(max_examples=25, deadline=None)
    @given(
        delta=st.floats(min_value=0.0, max_value=0.9),
        x=st.floats(min_value=-2.0, max_value=2.0),
        y=st.floats(min_value=-2.0, max_value=2.0),
        bump=st.booleans(),
    )
    def test_roundtrip_exact(self, delta, x, y, bump):
        kind = "bump" if bump else "affine"
        chart = BoundaryChart(kind=kind, delta=delta)
        p = np.array([[x, y]])
        # exact up to one rounding of the chart offset
        tol = 1e-15 * (1.0 + abs(float(chart.phi(np.array([x]))[0])))
        assert np.allclose(phi_inverse(chart, phi_map(chart, p)), p, atol=tol)
        assert np.allclose(phi_map(chart, phi_inverse(chart, p)), p, atol=tol)

    def test_bump_vanishes_at_base_with_flat_gradient(self):
        chart = BoundaryChart(kind="bump", delta=0.5, base=0.2)
        assert chart.phi(np.array([0.2]))[0] == 0.0
        assert chart.grad_phi(np.array([0.2]))[0] == 0.0

    def test_lipschitz_bound_tight(self):
        for kind in ("affine", "bump"):
            chart = BoundaryChart(kind=kind, delta=0.3)
            xs = np.linspace(-2.0, 2.0, 4001)
            assert np.max(np.abs(chart.grad_phi(xs))) <= 0.3 + 1e-12

    def test_delta_at_least_one_rejected(self):
        with pytest.raises(ValueError):
            BoundaryChart(kind="affine", delta=1.0)


class TestInclusions:
    def test_zero_chart(self):
        chart = BoundaryChart(kind="affine", delta=0.0)
        rep = inclusion_audit(chart, [0.0, 0.0], 0.5)
        assert rep.passed

    def test_steep_chart_still_passes(self):
        chart = BoundaryChart(kind="affine", delta=0.9)
        rep = inclusion_audit(chart, [0.4, -0.3], 0.7)
        assert rep.passed

    def test_bump_chart(self):
        chart = BoundaryChart(kind="bump", delta=0.6)
        rep = inclusion_audit(chart, [0.1, 0.2], 0.4)
        assert rep.passed


class TestCoefficients:
    def test_zero_chart_no_correction(self):
        chart = BoundaryChart(kind="affine", delta=0.0)
        a_t, b_f, rep = pushforward_coefficients(chart, lambda x, t: np.eye(2), 0.5)
        assert rep.passed
        assert np.allclose(b_f(np.array([0.3, 0.1]), 0.0), 0.0)
        assert np.allclose(a_t(np.array([0.3, 0.1]), 0.0), np.eye(2))

    def test_identity_affine_closed_form(self):
        delta = 0.3
        chart = BoundaryChart(kind="affine", delta=delta)
        B = b_matrix(chart, np.eye(2), 0.0)
        assert np.allclose(B, [[0.0, -delta], [-delta, delta ** 2]])

    def test_symmetry_preserved(self):
        chart = BoundaryChart(kind="affine", delta=0.4)
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        a_t, _, _ = pushforward_coefficients(chart, lambda x, t: A, 0.4)
        At = a_t(np.array([0.2, 0.3]), 0.0)
        assert np.allclose(At, At.T)

    def test_decomposition_identity(self):
        chart = BoundaryChart(kind="bump", delta=0.5)

        def A(x, t):
            return np.array([[1.5 + 0.2 * math.sin(x[0]), 0.1],
                             [0.1, 1.0 + 0.1 * t]])

        _, _, rep = pushforward_coefficients(chart, A, nu=0.4)
        row = next(r for r in rep.rows if r.label == "decomposition-identity")
        assert row.passed

    def test_b_norm_linear_exponent(self):
        rows = b_norm_delta_sweep([0.05, 0.1, 0.2])
        slope = fit_loglog_slope([r["delta"] for r in rows],
                                 [r["b_norm"] for r in rows])
        assert slope >= 0.9


class TestWeightPushforward:
    def fam(self):
        return BallFamily.default(DOM2, n_centers=5, n_radii=8)

    def test_zero_chart_no_inflation(self):
        chart = BoundaryChart(kind="affine", delta=0.0)
        beta = Weight.power(0.1, (0.0, 0.0), DOM2)
        rep = pushforward_weight_audit(chart, beta, CTX2, self.fam(),
                                       shape=(32, 32))
        row = rep.rows[0]
        assert row.passed
        assert row.constant == pytest.approx(1.0, rel=1e-9)

    def test_shifted_chart_within_budget(self):
        chart = BoundaryChart(kind="affine", delta=0.2)
        beta = Weight.power(0.1, (0.0, 0.0), DOM2)
        rep = pushforward_weight_audit(chart, beta, CTX2, self.fam(),
                                       shape=(32, 32))
        row = rep.rows[0]
        assert row.passed  # within 2^{n+2} M0
        assert row.lhs >= 1.0 - 1e-9

    def test_gate_on_base_budget(self):
        chart = BoundaryChart(kind="affine", delta=0.2)
        beta = Weight.power(0.9, (0.0, 0.0), DOM2)
        tight = WeightContext(n=2, M0=1.0)
        with pytest.raises(GateFailed):
            pushforward_weight_audit(chart, beta, tight, self.fam(), shape=(24, 24))

    def test_oscillation_quadratic_in_delta(self):
        rows = oscillation_delta_sweep([0.05, 0.1, 0.2], CTX2, shape=(32, 32))
        slope = fit_loglog_slope([r["delta"] for r in rows],
                                 [r["oscillation_sq"] for r in rows])
        assert slope >= 1.8, rows


class TestAdmissibleRadius:
    def test_radius_found_and_within_cap(self):
        from wparab.flattening import admissible_radius_search

        chart = BoundaryChart(kind="affine", delta=0.2)
        beta = Weight.power(0.1, (0.0, 0.0), DOM2)
        rep = admissible_radius_search(chart, beta, CTX2, R=0.8, t0=0.5,
                                       Lambda=2.0)
        assert rep.passed
        row = rep.rows[0]
        assert 0.0 < row.constant <= 0.8 / 4.0

    def test_tiny_time_budget_shrinks_radius(self):
        from wparab.flattening import admissible_radius_search

        chart = BoundaryChart(kind="affine", delta=0.2)
        beta = Weight.power(0.1, (0.0, 0.0), DOM2)
        big = admissible_radius_search(chart, beta, CTX2, R=0.8, t0=0.5,
                                       Lambda=2.0).rows[0].constant
        small = admissible_radius_search(chart, beta, CTX2, R=0.8, t0=1e-3,
                                         Lambda=2.0).rows[0].constant
        assert small < big


class TestJacobian:
    def test_gradient_chain_bound(self):
        # pulled-back gradients grow by at most 1 + delta < 2
        chart = BoundaryChart(kind="affine", delta=0.9)
        M = np.array([[1.0, 0.0], [-0.9, 1.0]])
        sigma_max = np.linalg.svd(M, compute_uv=False)[0]
        assert sigma_max <= 2.0

    def test_unit_determinant(self):
        # the chart is a shear: numeric Jacobian determinant is one
        for kind in ("affine", "bump"):
            chart = BoundaryChart(kind=kind, delta=0.4)
            eps = 1e-6
            for p in ([0.3, -0.2], [0.0, 0.5]):
                p = np.asarray(p)
                J = np.empty((2, 2))
                for j in range(2):
                    dp = np.zeros(2)
                    dp[j] = eps
                    J[:, j] = (phi_map(chart, (p + dp)[None, :])[0]
                               - phi_map(chart, (p - dp)[None, :])[0]) / (2 * eps)
                assert np.linalg.det(J) == pytest.approx(1.0, rel=1e-7)
