"""
Tests de la vérification: normes à poids, ajustements de décroissance,
audits de bornes, cas critique, identités des noyaux et divergence nulle.
"""
import numpy as np
import pytest

from src.cli.presets import critical_tangential, divform_gauss, rot_bump
from src.errors import DomainError
from src.solver import (
    POINTWISE, IterateField, LinearSolution, NonlinearSolution, PolarGrid, probe_geometry, solve_linear,
)
from src.solver.nonlinear import vortex_U
from src.verification import (
    audit_theorem_bounds, build_audit, combine_audits, extract_rotational_coefficient,
    field_divergence_check, fit_decay, fit_decay_samples, fit_solution_decay, k_decomposition_check,
    log_moment_fit, series_branch_check, theorem_shape, velocity_divergence_check, vortex_moment_check,
    weighted_norm,
)


def _power_field(p: float):
    """u(x) = x^perp |x|^(-p-1): |u| = |x|^-p."""
    def field(points):
        rho = np.linalg.norm(points, axis=-1)
        return np.stack([-points[:, 1], points[:, 0]], axis=-1) * rho[:, None] ** (-p - 1.0)

    return field


def _synthetic_solution(remainder_exponent: float, r: float = 0.5) -> LinearSolution:
    probes = probe_geometry(8, (2.0, 4.0, 8.0, 16.0, 32.0, 64.0))
    radius = np.linalg.norm(probes, axis=-1)
    remainder = np.zeros_like(probes)
    remainder[:, 0] = (1.0 + radius) ** (-remainder_exponent)
    n = len(probes)
    return LinearSolution(
        kind=POINTWISE, a=1.0, r=r, probes=probes, velocity=remainder.copy(),
        pressure=np.zeros(n), moment=np.zeros(n), remainder=remainder, errors=np.zeros(n),
        force_norm=1.0,
    )


# =============================================================================
# TESTS: Normes et coefficient dominant
# =============================================================================

class TestWeightedNorm:
    def test_on_points(self):
        points = np.array([[1.0, 0.0], [3.0, 0.0]])
        value = weighted_norm(lambda p: np.ones((len(p), 2)), 1.0, points)
        assert value == pytest.approx(4.0 * np.sqrt(2.0))

    def test_on_grid(self):
        grid = PolarGrid.logarithmic(6, 1.0, 100.0, 16)
        # (1+rho)^2 rho^-2 est maximal au plus petit rayon
        assert weighted_norm(_power_field(2.0), 2.0, grid) == pytest.approx(4.0)

    def test_rejects_negative_weight(self):
        with pytest.raises(DomainError):
            weighted_norm(_power_field(1.0), -0.5, np.ones((1, 2)))

    def test_rejects_non_planar_points(self):
        with pytest.raises(DomainError):
            weighted_norm(_power_field(1.0), 1.0, np.ones((2, 3)))


class TestRotationalCoefficient:
    def test_recovers_coefficient(self):
        m = 2.7

        def field(points):
            rho2 = np.sum(points ** 2, axis=-1)
            return m * np.stack([-points[:, 1], points[:, 0]], axis=-1) / (4 * np.pi * rho2[:, None])

        assert extract_rotational_coefficient(field, 40.0) == pytest.approx(m, rel=1e-12)

    def test_radial_field_has_no_coefficient(self):
        assert extract_rotational_coefficient(lambda p: p, 5.0) == pytest.approx(0.0, abs=1e-12)

    def test_validation(self):
        with pytest.raises(DomainError):
            extract_rotational_coefficient(lambda p: p, 0.0)
        with pytest.raises(DomainError):
            extract_rotational_coefficient(lambda p: p, 1.0, n_angles=8)


# =============================================================================
# TESTS: Exposants de décroissance
# =============================================================================

class TestDecayFit:
    def test_power_law_exponent(self):
        fit = fit_decay(_power_field(2.5), [1.0, 10.0, 100.0, 1000.0])
        assert fit.pooled_exponent == pytest.approx(2.5, rel=1e-10)
        assert fit.min_exponent == pytest.approx(2.5, rel=1e-10)
        assert fit.pooled_residual < 1e-10
        assert len(fit.angles) == 8

    def test_zero_field_decays_infinitely(self):
        fit = fit_decay_samples([1.0, 10.0, 100.0, 1000.0], np.zeros((2, 4)))
        assert fit.pooled_exponent == float('inf')
        assert fit.min_exponent == float('inf')

    def test_requires_enough_radii(self):
        with pytest.raises(DomainError):
            fit_decay_samples([1.0, 10.0, 100.0], np.ones(3))

    def test_requires_enough_decades(self):
        with pytest.raises(DomainError):
            fit_decay_samples([1.0, 2.0, 5.0, 10.0], np.ones(4))

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            fit_decay_samples([1.0, 10.0, 100.0, 1000.0], np.ones((2, 3)))

    def test_solution_remainder_table(self):
        fit = fit_solution_decay(_synthetic_solution(2.0))
        assert len(fit.exponents) == 8
        assert 1.5 < fit.pooled_exponent < 2.0

    def test_unknown_quantity(self):
        with pytest.raises(DomainError):
            fit_solution_decay(_synthetic_solution(2.0), 'vorticity')


# =============================================================================
# TESTS: Audits de bornes
# =============================================================================

class TestBuildAudit:
    def test_flat_ratios_pass(self):
        audit = build_audit('plat', [1.0, 2.0, 3.0], [([1, 2, 4, 8], [3.0, 2.0, 1.5, 1.0])])
        assert audit.passed
        assert audit.constant == 3.0
        assert audit.kendall_tau == pytest.approx(-1.0)

    def test_spread_fails(self):
        audit = build_audit('étalé', [1e-3, 1.0])
        assert not audit.passed
        assert audit.spread_decades == pytest.approx(3.0)

    def test_growing_trend_fails(self):
        audit = build_audit('croissant', [1.0, 1.5, 2.0, 2.5], [([1, 2, 4, 8], [1.0, 1.5, 2.0, 2.5])])
        assert not audit.passed
        assert audit.kendall_tau == pytest.approx(1.0)

    def test_zero_ratios_pass_trivially(self):
        audit = build_audit('nul', [0.0, 0.0])
        assert audit.passed
        assert audit.constant == 0.0

    def test_non_finite_ratios_are_dropped(self):
        audit = build_audit('nan', [1.0, float('nan'), 2.0])
        assert audit.n_samples == 2

    def test_combine(self):
        good = build_audit('a', [1.0, 2.0])
        bad = build_audit('b', [1e-3, 5.0])
        combined = combine_audits('ab', [good, bad])
        assert not combined.passed
        assert combined.constant == 5.0
        assert combined.n_samples == 4
        assert combined.to_dict()['parts'][0]['name'] == 'a'


class TestTheoremShape:
    def test_thm11(self):
        assert theorem_shape('thm1.1', 4.0, 0.5) == pytest.approx(2.0 + 4.0 ** -0.75)

    def test_thm12_log_factor(self):
        a = np.e ** 2
        assert theorem_shape('thm1.2', a, 0.0) == pytest.approx(1.0 + 3.0)
        assert theorem_shape('thm1.2', a, 0.0, with_log=False) == pytest.approx(2.0)

    def test_symmetric_in_rotation_sign(self):
        assert theorem_shape('thm1.3', -0.5, 0.2) == theorem_shape('thm1.3', 0.5, 0.2)

    def test_domain(self):
        with pytest.raises(DomainError):
            theorem_shape('thm1.1', 0.0, 0.5)
        with pytest.raises(DomainError):
            theorem_shape('thm1.1', 1.0, 1.0)
        with pytest.raises(DomainError):
            theorem_shape('thm2', 1.0, 0.5)


class TestTheoremAudit:
    def test_bounded_remainder_passes(self):
        audit = audit_theorem_bounds(_synthetic_solution(1.5), 'thm1.1')
        assert audit.passed
        assert audit.constant == pytest.approx(1.0 / theorem_shape('thm1.1', 1.0, 0.5))

    def test_slow_remainder_fails(self):
        audit = audit_theorem_bounds(_synthetic_solution(0.5), 'thm1.1')
        assert not audit.passed

    def test_log_factor_reported_at_r_zero(self):
        audit = audit_theorem_bounds([_synthetic_solution(1.0, r=0.0)], 'thm1.2')
        assert 'without_log' in audit.details
        assert 'log_factor_needed' in audit.details

    def test_unknown_bound(self):
        with pytest.raises(DomainError):
            audit_theorem_bounds(_synthetic_solution(1.5), 'lemma')


# =============================================================================
# TESTS: Cas critique et profil tourbillon
# =============================================================================

@pytest.mark.slow
class TestCriticalMoment:
    def test_log_divergence(self, budget):
        # m(R) = pi [ln(1+R^2) + 1/(1+R^2) - 1] ~ 2 pi ln R
        radii = [16.0, 64.0, 256.0, 1024.0]
        fit = log_moment_fit(critical_tangential(1.0), radii, budget)
        exact = [np.pi * (np.log1p(R ** 2) + 1.0 / (1.0 + R ** 2) - 1.0) for R in radii]
        assert fit.moments == pytest.approx(exact, rel=1e-5)
        assert fit.c1 == pytest.approx(2 * np.pi, rel=1e-2)
        assert fit.diverges
        assert fit.residual < 1e-2


class TestVortexMoment:
    def test_magnitude_two(self, budget):
        check = vortex_moment_check(budget)
        assert check['passed']
        assert check['sign'] == -1
        assert check['gap'] <= check['tolerance']


# =============================================================================
# TESTS: Identités des noyaux
# =============================================================================

class TestIdentities:
    def test_k_decomposition(self):
        check = k_decomposition_check(n_samples=40)
        assert check.passed
        assert check.n_samples == 40

    def test_series_branch(self):
        assert series_branch_check().passed

    def test_failing_tolerance_is_reported(self):
        check = series_branch_check(tolerance=0.0)
        assert check.max_error >= 0.0
        assert check.to_dict()['name'] == 'H série / forme fermée'


# =============================================================================
# TESTS: Divergence nulle
# =============================================================================

def _exact(fn):
    return lambda points: (fn(points), np.zeros(len(points)))


class TestDivergence:
    def test_vortex_is_divergence_free(self):
        points = probe_geometry(4, (0.5, 2.0, 8.0))
        check = velocity_divergence_check('div U', _exact(vortex_U), points)
        assert check.passed
        assert check.n_samples == len(points)

    def test_source_field_is_rejected(self):
        check = velocity_divergence_check('div x', _exact(lambda p: p.copy()), probe_geometry(4, (1.0, 3.0)))
        assert not check.passed
        assert check.max_error == pytest.approx(2.0)

    def test_quadrature_errors_widen_tolerance(self):
        # |x| < 1: h = 0.05, bruit = 4 * 1e-3 / (2 h)
        points = np.array([[0.5, 0.0], [0.0, -0.5]])
        noisy = velocity_divergence_check('div U', lambda p: (vortex_U(p), np.full(len(p), 1e-3)), points)
        exact = velocity_divergence_check('div U', _exact(vortex_U), points)
        assert noisy.tolerance == pytest.approx(exact.tolerance + 0.04)

    def test_grid_vortex_solution(self, small_grid):
        solution = NonlinearSolution(0.5, IterateField.zeros(small_grid, 0.5), 1.0, 0.5)
        nodes = small_grid.points[1:-1].reshape(-1, 2)
        check = field_divergence_check('div alpha U', solution, nodes)
        assert check.passed
        assert check.max_error < 1e-12

    def test_grid_source_field_is_rejected(self, small_grid):
        field = IterateField.from_function(small_grid, lambda p: p.copy(), 0.5)
        check = field_divergence_check('div x', field, small_grid.points[1:-1].reshape(-1, 2))
        assert not check.passed

    @pytest.mark.slow
    def test_linear_solutions_are_divergence_free(self, loose_budget):
        points = np.array([[2.0, 0.5], [-1.0, -3.0]])
        for force in (rot_bump(1.0), divform_gauss(1.0, antisymmetric=0.5)):
            def velocity(stencil, force=force):
                solution = solve_linear(force, 1.0, stencil, loose_budget, with_pressure=False)
                return solution.velocity, solution.errors

            check = velocity_divergence_check(f'div {force.name}', velocity, points)
            assert check.passed, check.to_dict()
