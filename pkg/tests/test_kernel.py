"""
Tests des noyaux: formes fermées G, H, K, B, noyau dominant L et Gamma_a.
"""
import numpy as np
import pytest

from src.errors import DomainError
from src.kernel import (
    IDENTITY, KernelEvalConfig, far_field_bound_shape, fundamental_solution, gauss,
    grad_fundamental_solution, grad_kernel_K, grad_leading_kernel, kernel_B, kernel_H, kernel_K,
    leading_kernel, mirrored_leading_kernel, perp, rotation,
)
from src.kernel.kernels import d1_factor, d1_prime, e_factor


# =============================================================================
# TESTS: Facteurs scalaires
# =============================================================================

class TestScalarFactors:
    def test_limits_at_zero(self):
        assert e_factor(0.0) == pytest.approx(1.0)
        assert d1_factor(0.0) == pytest.approx(0.5)
        assert d1_prime(0.0) == pytest.approx(-1.0 / 3.0)

    def test_closed_form_away_from_zero(self):
        rho = np.array([0.5, 2.0, 30.0])
        assert e_factor(rho) == pytest.approx((1 - np.exp(-rho)) / rho, rel=1e-14)
        expected = ((1 - np.exp(-rho)) / rho - np.exp(-rho)) / rho
        assert d1_factor(rho) == pytest.approx(expected, rel=1e-13)

    def test_series_matches_closed_form_near_switch(self):
        rho = np.linspace(2e-4, 5e-3, 30)
        series = d1_factor(rho, switch=0.5)
        closed = d1_factor(rho, switch=1e-9)
        assert np.max(np.abs(series - closed)) < 1e-10

    def test_d1_prime_is_derivative(self):
        rho = np.array([0.05, 0.3, 1.0, 4.0])
        h = 1e-6
        fd = (d1_factor(rho + h) - d1_factor(rho - h)) / (2 * h)
        assert d1_prime(rho) == pytest.approx(fd, rel=1e-6)

    def test_invalid_switch(self):
        with pytest.raises(DomainError):
            KernelEvalConfig(series_switch_radius=1.5)


# =============================================================================
# TESTS: Noyaux en temps
# =============================================================================

class TestTimeKernels:
    def test_k_is_gauss_plus_h(self, rng):
        z = rng.normal(size=(50, 2)) * 3
        t = rng.uniform(0.01, 10, size=50)
        expected = gauss(z, t)[:, None, None] * IDENTITY + kernel_H(z, t)
        assert np.max(np.abs(kernel_K(z, t) - expected)) < 1e-14

    def test_k_decomposition_with_b(self, rng):
        z = rng.normal(size=(50, 2)) * 3
        t = rng.uniform(0.01, 10, size=50)
        slow = (np.exp(-np.sum(z ** 2, axis=-1) / (4 * t)) / (8 * np.pi * t))[:, None, None] * IDENTITY
        assert np.max(np.abs(kernel_K(z, t) - slow - kernel_B(z, t))) < 1e-12

    def test_h_at_origin(self):
        t = 0.7
        assert kernel_H(np.zeros(2), t) == pytest.approx(-IDENTITY / (8 * np.pi * t))

    def test_b_vanishes_at_origin_and_is_traceless(self, rng):
        assert np.all(kernel_B(np.zeros(2), 1.3) == 0.0)
        z = rng.normal(size=(20, 2))
        trace = np.trace(kernel_B(z, 0.4), axis1=-2, axis2=-1)
        assert np.max(np.abs(trace)) < 1e-14

    def test_h_is_symmetric(self, rng):
        values = kernel_H(rng.normal(size=(10, 2)), 2.0)
        assert np.allclose(values, np.swapaxes(values, -1, -2))

    def test_grad_k_matches_finite_differences(self):
        z, t, h = np.array([0.8, -1.3]), 0.6, 1e-6
        grad = grad_kernel_K(z, t)
        for k in range(2):
            step = h * IDENTITY[k]
            fd = (kernel_K(z + step, t) - kernel_K(z - step, t)) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-8)

    def test_non_positive_time(self):
        with pytest.raises(DomainError):
            kernel_K(np.array([1.0, 0.0]), 0.0)
        with pytest.raises(DomainError):
            kernel_B(np.array([1.0, 0.0]), -1.0)


# =============================================================================
# TESTS: Noyau dominant
# =============================================================================

class TestLeadingKernel:
    def test_rank_one_structure(self):
        x, y = np.array([3.0, 4.0]), np.array([0.2, -0.1])
        value = leading_kernel(x, y)
        assert value == pytest.approx(np.outer(perp(x), perp(y)) / (4 * np.pi * 25.0))
        assert np.linalg.matrix_rank(value) == 1

    def test_gradient_matches_finite_differences(self):
        x, y, h = np.array([2.0, -1.0]), np.array([0.3, 0.4]), 1e-6
        grad = grad_leading_kernel(x, y)
        for k in range(2):
            fd = (leading_kernel(x, y + h * IDENTITY[k]) - leading_kernel(x, y - h * IDENTITY[k])) / (2 * h)
            assert grad[k] == pytest.approx(fd, abs=1e-9)

    def test_mirror_is_transpose(self):
        x, y = np.array([0.1, 0.3]), np.array([5.0, -2.0])
        assert mirrored_leading_kernel(x, y) == pytest.approx(leading_kernel(y, x).T)

    def test_undefined_at_origin(self):
        with pytest.raises(DomainError):
            leading_kernel(np.zeros(2), np.array([1.0, 0.0]))


class TestFarFieldShape:
    def test_order_zero_large_a(self):
        # a = 1, |x| = 10, y = 0: 1/(a|x|^2) + |x| * 1/(a|x|^3)
        assert far_field_bound_shape(1.0, (10.0, 0.0), (0.0, 0.0)) == pytest.approx(0.02)

    def test_decreases_with_distance(self):
        shapes = [far_field_bound_shape(0.5, (r, 0.0), (0.3, 0.0), order=1) for r in (4, 8, 16, 32)]
        assert all(b < a for a, b in zip(shapes, shapes[1:]))

    def test_unsupported_order(self):
        with pytest.raises(DomainError):
            far_field_bound_shape(1.0, (4.0, 0.0), (0.0, 0.0), order=2)


# =============================================================================
# TESTS: Solution fondamentale Gamma_a
# =============================================================================

class TestFundamentalSolution:
    def test_rejects_zero_rotation(self):
        with pytest.raises(DomainError, match="paradoxe de Stokes"):
            fundamental_solution(0.0, (1.0, 0.0), (0.0, 0.0))

    def test_rejects_coincident_points(self):
        with pytest.raises(DomainError):
            fundamental_solution(1.0, (1.0, 2.0), (1.0, 2.0))

    @pytest.mark.slow
    def test_adjoint_symmetry(self, loose_budget):
        x, y = np.array([1.5, 0.5]), np.array([-0.4, 0.9])
        direct, err1 = fundamental_solution(0.8, x, y, budget=loose_budget)
        adjoint, err2 = fundamental_solution(-0.8, y, x, budget=loose_budget)
        assert np.max(np.abs(direct - adjoint.T)) <= 2 * max(err1 + err2, loose_budget.tolerance(direct))

    @pytest.mark.slow
    def test_rotation_covariance(self, loose_budget):
        x, y, O = np.array([2.0, 0.0]), np.array([0.0, 0.5]), rotation(0.9)
        base, err1 = fundamental_solution(1.0, x, y, budget=loose_budget)
        turned, err2 = fundamental_solution(1.0, O @ x, O @ y, budget=loose_budget)
        assert np.max(np.abs(turned - O @ base @ O.T)) <= 2 * max(err1 + err2, loose_budget.tolerance(base))

    @pytest.mark.slow
    def test_gradient_layout(self, loose_budget):
        grad, _ = grad_fundamental_solution(1.0, (3.0, 1.0), (0.2, 0.1), budget=loose_budget)
        assert grad.shape == (2, 2, 2)
        assert np.all(np.isfinite(grad))
