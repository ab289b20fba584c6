"""
Tests des moteurs d'intégration: budgets, 1-D, queue oscillante, plan polaire.
"""
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
import pytest

from src.errors import ConvergenceFailure, DomainError
from src.quadrature import (
    DecayClass, QuadratureBudget, Region, composite_rule, gauss_legendre, integrate_1d,
    integrate_plane, integrate_region, integrate_time_oscillatory, singular_potential,
)
from src.quadrature.oscillatory import aitken_extrapolate, checkpoint_schedule, richardson_extrapolate


# =============================================================================
# TESTS: Budget et classes de décroissance
# =============================================================================

class TestBudget:
    def test_rejects_non_positive_tolerance(self):
        with pytest.raises(DomainError):
            QuadratureBudget(abs_tol=0.0)

    def test_rejects_tiny_eval_budget(self):
        with pytest.raises(DomainError):
            QuadratureBudget(max_evals=10)

    def test_tolerance_is_max_of_abs_and_rel(self, budget):
        assert budget.tolerance(0.0) == budget.abs_tol
        assert budget.tolerance(np.array([1e6, -2e6])) == pytest.approx(budget.rel_tol * 2e6)

    def test_scaled_and_tightened(self, budget):
        bigger = budget.scaled(2.0)
        assert bigger.max_evals == 2 * budget.max_evals
        assert bigger.truncation_radius_cap == 2 * budget.truncation_radius_cap
        tighter = budget.tightened(10.0)
        assert tighter.abs_tol == pytest.approx(budget.abs_tol / 10)
        with pytest.raises(DomainError):
            budget.scaled(0.0)


class TestDecayClass:
    def test_tail_bound_closed_form(self):
        # int_0^inf rho (1+rho)^-4 drho = 1/6
        assert DecayClass(4.0, 3.0).tail_bound(0.0) == pytest.approx(2 * np.pi * 3.0 / 6.0)

    def test_tail_bound_zero_beyond_support(self):
        assert DecayClass(4.0, 1.0, support_radius=2.0).tail_bound(2.5) == 0.0

    def test_tail_requires_exponent_above_two(self):
        with pytest.raises(DomainError):
            DecayClass(2.0, 1.0).tail_bound(1.0)

    def test_truncation_radius_meets_target(self):
        decay = DecayClass(4.0, 1.0)
        radius, tail = decay.truncation_radius(1e-4, 1e6)
        assert tail < 1e-4
        assert decay.tail_bound(0.9 * radius) >= 1e-4

    def test_truncation_radius_capped(self):
        radius, tail = DecayClass(2.5, 1.0).truncation_radius(1e-12, 50.0)
        assert radius == 50.0
        assert tail > 1e-12

    def test_check_detects_violation(self):
        decay = DecayClass(3.0, 1.0)
        points = np.array([[10.0, 0.0]])
        decay.check(points, np.array([[1e-4, 0.0]]))
        with pytest.raises(DomainError):
            decay.check(points, np.array([[1.0, 0.0]]))

    def test_invalid_declarations(self):
        with pytest.raises(DomainError):
            DecayClass(-1.0, 1.0)
        with pytest.raises(DomainError):
            DecayClass(3.0, 0.0)


# =============================================================================
# TESTS: Quadrature 1-D
# =============================================================================

class TestLineQuadrature:
    def test_gauss_legendre_exact_for_polynomials(self):
        nodes, weights = gauss_legendre(4)
        assert np.sum(weights * nodes ** 6) == pytest.approx(2.0 / 7.0)

    def test_composite_rule(self):
        points, weights = composite_rule(np.linspace(0.0, np.pi, 5), 8)
        assert np.sum(weights * np.sin(points)) == pytest.approx(2.0, rel=1e-12)

    def test_infinite_interval(self, budget):
        value, error = integrate_1d(lambda t: np.exp(-t), (0.0, np.inf), budget)
        assert value == pytest.approx(1.0, abs=1e-8)
        assert error < 1e-6

    def test_matrix_valued_integrand(self, budget):
        value, _ = integrate_1d(lambda t: np.array([[t, 1.0], [t ** 2, 0.0]]), (0.0, 1.0), budget)
        assert value == pytest.approx(np.array([[0.5, 1.0], [1.0 / 3.0, 0.0]]))

    def test_failure_carries_partial_value(self, budget):
        info = SimpleNamespace(success=False, status=1, neval=210)
        with patch('src.quadrature.line.quad_vec', return_value=(0.25, 0.1, info)):
            with pytest.raises(ConvergenceFailure) as excinfo:
                integrate_1d(lambda t: t, (0.0, 1.0), budget)
        assert excinfo.value.value == 0.25
        assert excinfo.value.error == 0.1


# =============================================================================
# TESTS: Queue oscillante en temps
# =============================================================================

def _expected_rotation(c: float, s: float) -> np.ndarray:
    return np.array([[c, s], [-s, c]])


class TestOscillatoryTime:
    def test_exponential_weight(self, budget):
        a = 2.0
        value, _ = integrate_time_oscillatory(lambda t: np.exp(-t)[:, None, None] * np.eye(2), a, 1.0, budget)
        expected = _expected_rotation(1.0 / (1 + a ** 2), a / (1 + a ** 2))
        assert value == pytest.approx(expected, abs=1e-6)

    def test_slow_tail_integrated_exactly(self, budget):
        # int_0^inf O(at)^T (1 - e^-t)/t dt: cos -> log(1 + 1/a^2)/2, sin -> arctan(1/a)
        a = 1.0

        def M(t):
            return (-np.expm1(-t) / t)[:, None, None] * np.eye(2)

        value, error = integrate_time_oscillatory(M, a, 1.0, budget, tail_coefficient=np.eye(2))
        expected = _expected_rotation(0.5 * np.log(2.0), np.pi / 4)
        assert value == pytest.approx(expected, abs=1e-5)
        assert np.all(error < 1e-4)

    def test_negative_rotation_flips_sine(self, budget):
        value, _ = integrate_time_oscillatory(lambda t: np.exp(-t)[:, None, None] * np.eye(2), -1.0, 1.0, budget)
        assert value[0, 1] == pytest.approx(-0.5, abs=1e-6)

    def test_rejects_zero_rotation(self, budget):
        with pytest.raises(DomainError, match="paradoxe de Stokes"):
            integrate_time_oscillatory(lambda t: np.ones((len(t), 2, 2)), 0.0, 1.0, budget)

    def test_rejects_bad_cutoff(self, budget):
        with pytest.raises(DomainError):
            integrate_time_oscillatory(lambda t: np.ones((len(t), 2, 2)), 1.0, 0.0, budget)

    def test_checkpoint_schedule_is_increasing(self):
        counts = checkpoint_schedule(64)
        assert counts[0] == 4
        assert counts[-1] <= 64
        assert all(b > a for a, b in zip(counts, counts[1:]))

    def test_richardson_removes_linear_term(self):
        h = np.array([0.5, 0.25, 0.125])
        values = 3.0 + 2.0 * h + 0.5 * h ** 2
        assert richardson_extrapolate(h, values) == pytest.approx(3.0)

    def test_aitken_on_geometric_series(self):
        partial = np.cumsum(0.5 ** np.arange(4))
        assert aitken_extrapolate(partial) == pytest.approx(2.0, abs=1e-10)

    def test_aitken_acceleration_exponential_weight(self, budget):
        a = 2.0
        M = lambda t: np.exp(-t)[:, None, None] * np.eye(2)
        value, error = integrate_time_oscillatory(M, a, 1.0, budget, acceleration='aitken')
        assert value == pytest.approx(_expected_rotation(1.0 / (1 + a ** 2), a / (1 + a ** 2)), abs=1e-6)
        assert np.all(error < 1e-6)
        richardson, _ = integrate_time_oscillatory(M, a, 1.0, budget)
        assert value == pytest.approx(richardson, abs=1e-7)

    def test_aitken_acceleration_with_slow_tail(self, budget):
        def M(t):
            return (-np.expm1(-t) / t)[:, None, None] * np.eye(2)

        value, _ = integrate_time_oscillatory(M, 1.0, 1.0, budget, tail_coefficient=np.eye(2),
                                              acceleration='aitken')
        assert value == pytest.approx(_expected_rotation(0.5 * np.log(2.0), np.pi / 4), abs=1e-5)

    def test_rejects_unknown_acceleration(self, budget):
        with pytest.raises(DomainError, match="Accélération inconnue"):
            integrate_time_oscillatory(lambda t: np.ones((len(t), 2, 2)), 1.0, 1.0, budget, acceleration='wynn')


# =============================================================================
# TESTS: Plan polaire
# =============================================================================

class TestPlaneQuadrature:
    def test_region_validation(self):
        with pytest.raises(DomainError):
            Region('annulus', 2.0, 1.0)
        with pytest.raises(DomainError):
            Region('sector')

    def test_annulus_area(self, budget):
        value, _ = integrate_region(lambda p: np.ones(len(p)), Region.annulus(1.0, 2.0), budget)
        assert value == pytest.approx(3 * np.pi, rel=1e-10)

    def test_gaussian_over_plane(self, budget):
        decay = DecayClass(4.0, 8.0, support_radius=10.0)
        value, _ = integrate_plane(lambda p: np.exp(-np.sum(p ** 2, axis=-1)), decay, budget)
        assert value == pytest.approx(np.pi, abs=1e-6)

    def test_unbounded_requires_decay(self, budget):
        with pytest.raises(DomainError):
            integrate_region(lambda p: np.ones(len(p)), Region.plane(), budget)

    def test_non_integrable_decay(self, budget):
        with pytest.raises(DomainError):
            integrate_plane(lambda p: np.ones(len(p)), DecayClass(2.0, 1.0), budget)

    def test_singular_potential_inverts_gradient(self, budget):
        # f = grad phi, phi = e^{-|y|^2}: (1/2 pi) int (x-y)/|x-y|^2 . f dy = phi(x)
        def f(p):
            return -2.0 * p * np.exp(-np.sum(p ** 2, axis=-1))[:, None]

        x = np.array([0.5, 0.3])
        value, _ = singular_potential(x, f, DecayClass(4.0, 20.0, support_radius=8.0), budget)
        assert value == pytest.approx(np.exp(-0.34), abs=1e-5)

    def test_refinement_failure(self):
        tiny = QuadratureBudget(abs_tol=1e-14, rel_tol=1e-14, max_evals=100)
        with pytest.raises(ConvergenceFailure):
            integrate_region(lambda p: np.cos(40 * p[:, 0]), Region.disk(5.0), tiny)
