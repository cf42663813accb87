import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wparab.oscillation import (
    OscillationConfig,
    oscillation_supremum,
    theta_A_ms,
    theta_beta_ms,
)
from wparab.weights import Weight, WeightContext

DOM = (-1.0, 1.0)
CTX = WeightContext(n=1, M0=10.0)
MASK = (-1.0, 1.0, -1.0, 0.0)


def theta_beta_quadrature(profile, x0, r, n=200000):
    """Independent oracle: direct quadrature of the defining integrand."""
    x = np.linspace(x0 - r, x0 + r, n + 1)
    mid = 0.5 * (x[:-1] + x[1:])
    dx = x[1] - x[0]
    b = profile(mid)
    mean = np.sum(b) * dx / (2 * r)
    mass = np.sum(b) * dx
    return float(np.sum((b - mean) ** 2 / b) * dx / mass)


class TestThetaBeta:
    def test_constant_weight_zero(self):
        for c in (0.5, 1.0, 7.0):
            w = Weight.constant(c, DOM)
            assert theta_beta_ms(w, [0.0], 0.5) == 0.0

    def test_power_weight_against_quadrature(self):
        w = Weight.power(0.1, 0.0, DOM)
        got = theta_beta_ms(w, [0.0], 1.0)
        ref = theta_beta_quadrature(lambda x: np.abs(x) ** 0.1, 0.0, 1.0)
        assert got == pytest.approx(ref, rel=1e-3)
        assert got > 0.0

    def test_linear_perturbation_quadratic_order(self):
        # b = 1 + eps*x: theta ~ (eps*r)^2/3 to leading order
        r = 1.0
        for eps in (1e-2, 1e-3):
            nodes = np.linspace(1.0 - eps, 1.0 + eps, 4097)
            w = Weight.sampled(nodes, DOM, quadrature="trapezoid")
            got = theta_beta_ms(w, [0.0], r)
            assert got == pytest.approx(eps ** 2 * r ** 2 / 3.0, rel=2e-2)

    @settings(max_examples=20, deadline=None)
    @given(c=st.floats(min_value=1e-3, max_value=1e3))
    def test_invariant_under_weight_scaling(self, c):
        w = Weight.power(0.2, 0.1, DOM)
        v1 = theta_beta_ms(w, [0.0], 0.7)
        v2 = theta_beta_ms(w.rescaled(c), [0.0], 0.7)
        assert v2 == pytest.approx(v1, rel=1e-10, abs=1e-14)


class TestThetaA:
    def test_time_dependent_coefficient_invisible(self):
        beta = Weight.constant(1.0, DOM)

        def A(x, t):
            return 2.0 + np.sin(17.0 * t)

        got = theta_A_ms(A, beta, ([0.0], 0.0), 0.5, MASK, CTX)
        assert got == pytest.approx(0.0, abs=1e-24)

    def test_linear_in_space_order(self):
        beta = Weight.constant(1.0, DOM)
        for eps in (0.1, 0.01):
            def A(x, t, e=eps):
                return 1.0 + e * x

            got = theta_A_ms(A, beta, ([0.0], 0.0), 0.5, MASK, CTX)
            # per-slice variance of e*x over (-r, r) is e^2 r^2 / 3
            assert got == pytest.approx(eps ** 2 * 0.25 / 3.0, rel=5e-2)

    def test_checkerboard_exact_cellwise(self):
        beta = Weight.constant(1.0, DOM)

        def A(x, t):
            return 2.0 if x >= 0.0 else 1.0

        # symmetric ball: mean 1.5, squared deviation 0.25 everywhere
        got = theta_A_ms(A, beta, ([0.0], 0.0), 0.5, MASK, CTX, n_space=34)
        assert got == pytest.approx(0.25, rel=5e-2)

    def test_time_shift_invariance(self):
        beta = Weight.constant(1.0, DOM)

        def A1(x, t):
            return 1.0 + 0.3 * np.sin(3 * x)

        def A2(x, t):
            return 1.0 + 0.3 * np.sin(3 * x) + 5.0 * np.cos(t)

        v1 = theta_A_ms(A1, beta, ([0.1], -0.1), 0.4, MASK, CTX)
        v2 = theta_A_ms(A2, beta, ([0.1], -0.1), 0.4, MASK, CTX)
        assert v2 == pytest.approx(v1, rel=1e-10)

    def test_matrix_valued(self):
        beta = Weight.constant(1.0, DOM)

        def A(x, t):
            return np.array([[1.0 + 0.1 * x, 0.0], [0.0, 1.0]])

        got = theta_A_ms(A, beta, ([0.0], 0.0), 0.5, MASK, CTX)
        assert got == pytest.approx(0.01 * 0.25 / 3.0, rel=5e-2)


class TestSupremum:
    def test_identity_all_zero(self):
        beta = Weight.constant(1.0, DOM)
        cfg = OscillationConfig(R0=0.5, delta=0.1)
        rep = oscillation_supremum(lambda x, t: 1.0, beta, cfg, MASK, CTX)
        assert rep.passed
        gate = next(r for r in rep.rows if r.label == "smallness-gate")
        assert gate.lhs == pytest.approx(0.0, abs=1e-12)

    def test_zero_delta_fails_unless_constant(self):
        beta = Weight.power(0.1, 0.0, DOM)
        cfg = OscillationConfig(R0=0.5, delta=0.0)
        rep = oscillation_supremum(lambda x, t: 1.0, beta, cfg, MASK, CTX)
        assert not rep.passed

    def test_power_weight_oscillation_decreases_with_alpha(self):
        cfg = OscillationConfig(R0=0.5, delta=10.0)
        sups = []
        for alpha in (0.4, 0.2, 0.1, 0.05):
            beta = Weight.power(alpha, 0.0, DOM)
            rep = oscillation_supremum(None, beta, cfg, MASK, CTX)
            row = next(r for r in rep.rows if r.label == "weight-mean-oscillation")
            sups.append(row.lhs)
        assert all(b < a for a, b in zip(sups, sups[1:]))

    def test_monotone_under_lattice_refinement(self):
        beta = Weight.power(0.3, 0.17, DOM)
        coarse = OscillationConfig(R0=0.5, delta=1.0,
                                   centers=np.linspace(-0.9, 0.9, 5))
        fine = OscillationConfig(R0=0.5, delta=1.0,
                                 centers=np.linspace(-0.9, 0.9, 17))
        sup_c = oscillation_supremum(None, beta, coarse, MASK, CTX).rows[1].lhs
        sup_f = oscillation_supremum(None, beta, fine, MASK, CTX).rows[1].lhs
        assert sup_f >= sup_c - 1e-15
