"""
Tests du problème linéaire: forces, pool, solveur par sondes, grille polaire,
champ itéré et résidu faible.
"""
from unittest.mock import patch

import numpy as np
import pytest

from src.cli.presets import critical_tangential, divform_gauss, rot_bump
from src.errors import DomainError
from src.quadrature.budget import DecayClass
from src.solver import (
    DIVERGENCE_FORM, POINTWISE, CurlGaussian, ForceSpec, IterateField, PolarGrid,
    default_test_functions, force_weighted_norm, pressure_pointforce, probe_geometry,
    solve_linear, solve_linear_divform, solve_linear_pointforce, truncated_moment,
    linear_weak_residual, rule_weak_residual, weak_form_residual, zero_force,
)
from src.solver.forces import plateau_cutoff, sample_points, smooth_cutoff
from src.solver.linear import (
    density_decay, far_path_error, kernel_truncation, leading_density, probe_velocity, rotational_profile,
)
from src.solver.nonlinear import vortex_U, vortex_forcing
from src.solver.pool import map_ordered, resolve_workers
from src.solver.weak import weak_rule


# =============================================================================
# TESTS: Forces
# =============================================================================

class TestForces:
    def test_cutoffs(self):
        assert smooth_cutoff(np.array([0.0, 1.0, 2.0])) == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
        assert plateau_cutoff(np.array([0.0, 0.1, 1.5])) == pytest.approx([1.0, 1.0, 0.0])

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            ForceSpec('volumic', lambda p: p, DecayClass(4.0, 1.0))

    def test_analytic_divergence_matches_finite_differences(self):
        force = divform_gauss(1.0, antisymmetric=0.3)
        fd = ForceSpec(DIVERGENCE_FORM, force.field, force.decay)
        points = np.array([[0.4, -0.7], [1.2, 0.5]])
        assert force.pointwise_density(points) == pytest.approx(fd.pointwise_density(points), abs=1e-8)

    def test_spot_check_rejects_false_declaration(self):
        force = ForceSpec(POINTWISE, lambda p: np.ones_like(p), DecayClass(3.0, 1.0))
        with pytest.raises(DomainError):
            force.spot_check(16.0)

    def test_presets_declare_decay_truthfully(self):
        for force in (rot_bump(2.0), critical_tangential(1.0), divform_gauss(1.0, 0.5)):
            force.spot_check(64.0)

    def test_critical_force_has_no_moment(self):
        with pytest.raises(DomainError):
            critical_tangential().require_moment()

    def test_zero_force(self):
        force = zero_force()
        assert force.is_zero()
        assert np.all(force(np.ones((3, 2))) == 0.0)
        assert zero_force(DIVERGENCE_FORM).pointwise_density(np.ones((2, 2))).shape == (2, 2)

    def test_weighted_norm(self):
        # |f| = s psi(rho) rho nul hors du disque unité: borne par 2^s max |f|
        force = rot_bump(1.0)
        norm = force_weighted_norm(force, 3.5)
        points = sample_points(1.0)
        assert norm >= np.max(np.linalg.norm(force(points), axis=-1))
        assert norm <= 2 ** 3.5 * np.max(np.linalg.norm(force(points), axis=-1))
        assert len(points) == 1 + 64 * 32

    def test_scaled_force(self):
        force = divform_gauss(1.0, antisymmetric=0.5)
        doubled = force.scaled(-2.0)
        points = np.array([[0.4, -0.7]])
        assert doubled(points) == pytest.approx(-2.0 * force(points))
        assert doubled.pointwise_density(points) == pytest.approx(-2.0 * force.pointwise_density(points))
        assert doubled.decay.bound == pytest.approx(2.0 * force.decay.bound)
        assert doubled.parameters['strength'] == -2.0
        with pytest.raises(DomainError):
            force.scaled(0.0)


# =============================================================================
# TESTS: Pool de threads
# =============================================================================

class TestPool:
    def test_results_keep_input_order(self):
        assert map_ordered(lambda v: v * v, range(20), workers=4) == [v * v for v in range(20)]

    def test_resolve_workers(self):
        assert resolve_workers(3) == 3
        assert resolve_workers(0) >= 1


# =============================================================================
# TESTS: Solveur linéaire par sondes
# =============================================================================

class TestLinearHelpers:
    def test_rotational_profile(self):
        profile = rotational_profile(np.array([[2.0, 0.0], [0.0, 0.0]]))
        assert profile[0] == pytest.approx([0.0, 1.0 / (8 * np.pi)])
        assert np.all(profile[1] == 0.0)

    def test_probe_geometry(self):
        probes = probe_geometry(4, (1.0, 2.0))
        assert probes.shape == (8, 2)
        assert probes[1] == pytest.approx([2.0, 0.0])
        assert probes[2] == pytest.approx([0.0, 1.0], abs=1e-15)

    def test_truncated_moment(self, budget, gaussian_force):
        value, _ = truncated_moment(gaussian_force, 8.0, budget)
        assert value == pytest.approx(np.pi, rel=1e-6)
        assert truncated_moment(gaussian_force, 0.0, budget) == (0.0, 0.0)

    def test_leading_density_of_tensor(self):
        force = divform_gauss(2.0, antisymmetric=0.5)
        # F12 - F21 = 2 k s g(0) a l'origine
        assert leading_density(force)(np.zeros((1, 2))) == pytest.approx([2.0])

    def test_kernel_truncation_uses_support(self, budget):
        assert kernel_truncation(DecayClass(4.0, 1.0, support_radius=3.0), 10.0, budget) == (3.0, 0.0)
        # queue (1+|x|) M (1+R)^(1-s)/(2(s-1)) au rayon plafonné
        radius, tail = kernel_truncation(DecayClass(4.0, 1.0), 2.0, budget)
        assert radius == budget.truncation_radius_cap
        assert tail == pytest.approx(0.5 * 65.0 ** -3)

    def test_density_decay_gains_one_power(self):
        force = divform_gauss()
        assert density_decay(force).exponent == force.decay.exponent + 1.0

    def test_pressure_of_gradient_force(self, budget):
        # f = grad e^{-|y|^2}: p = e^{-|x|^2}
        force = ForceSpec(POINTWISE, lambda p: -2.0 * p * np.exp(-np.sum(p ** 2, axis=-1))[:, None],
                          DecayClass(4.0, 20.0, support_radius=8.0))
        assert pressure_pointforce(force, np.array([1.0, 0.5]), budget) == pytest.approx(np.exp(-1.25), abs=1e-5)


class TestLinearSolver:
    def test_rejects_zero_rotation(self, budget):
        with pytest.raises(DomainError, match="paradoxe de Stokes"):
            solve_linear_pointforce(rot_bump(), 0.0, [[2.0, 0.0]], budget)

    def test_rejects_wrong_force_kind(self, budget):
        with pytest.raises(DomainError):
            solve_linear_pointforce(divform_gauss(), 1.0, [[2.0, 0.0]], budget)
        with pytest.raises(DomainError):
            solve_linear_divform(rot_bump(), 1.0, [[2.0, 0.0]], budget)

    def test_zero_force_gives_zero_field(self, budget):
        solution = solve_linear(zero_force(), 1.0, probe_geometry(4, (1.0, 2.0, 4.0)), budget, workers=1)
        assert np.all(solution.velocity == 0.0)
        assert np.all(solution.moment == 0.0)
        assert np.all(solution.remainder == 0.0)
        assert solution.r == pytest.approx(0.5)
        assert solution.force_norm == 0.0

    def test_rows_layout(self, budget):
        solution = solve_linear(zero_force(), 1.0, [[3.0, 4.0]], budget, r=0.2, workers=1)
        row = solution.rows()[0]
        assert set(row) == {'x1', 'x2', 'u1', 'u2', 'p', 'moment', 'rem1', 'rem2', 'err_est'}
        assert (row['x1'], row['x2']) == (3.0, 4.0)
        assert solution.r == 0.2

    @pytest.mark.slow
    def test_velocity_is_linear_in_force(self, loose_budget):
        probes = [[3.0, 1.0]]
        one = solve_linear_pointforce(rot_bump(1.0), 1.0, probes, loose_budget, with_pressure=False)
        two = solve_linear_pointforce(rot_bump(2.0), 1.0, probes, loose_budget, with_pressure=False)
        assert two.velocity == pytest.approx(2.0 * one.velocity, rel=1e-3, abs=1e-8)

    @pytest.mark.slow
    def test_divergence_form_matches_pointwise_density(self, loose_budget):
        force = divform_gauss(1.0, antisymmetric=0.5)
        pointwise = ForceSpec(POINTWISE, force.pointwise_density, density_decay(force))
        probe = [[4.0, 1.0]]
        direct = solve_linear_pointforce(pointwise, 1.0, probe, loose_budget, with_pressure=False)
        divform = solve_linear_divform(force, 1.0, probe, loose_budget, with_pressure=False)
        allowed = direct.errors[0] + divform.errors[0] + 2 * loose_budget.tolerance(direct.velocity)
        assert np.max(np.abs(direct.velocity - divform.velocity)) <= allowed


# =============================================================================
# TESTS: Grille polaire et champ itéré
# =============================================================================

class TestPolarGrid:
    def test_validation(self):
        with pytest.raises(DomainError):
            PolarGrid((1.0, 2.0, 3.0))
        with pytest.raises(DomainError):
            PolarGrid((1.0, 2.0, 3.0, 4.0), n_angles=9)

    def test_shapes(self, small_grid):
        assert small_grid.points.shape == (12, 16, 2)
        radii, weights = small_grid.source_rule
        assert small_grid.source_points.shape == (len(radii), 16, 2)
        # les poids intègrent 1 sur le disque de rayon 2 rho_max
        assert np.sum(weights) * 16 == pytest.approx(np.pi * (2 * 32.0) ** 2, rel=1e-10)


class TestIterateField:
    def test_interpolates_smooth_field(self, small_grid):
        field = IterateField.from_function(small_grid, vortex_U, 0.5)
        points = np.array([[1.3, -0.4], [-5.0, 2.0]])
        assert field(points) == pytest.approx(vortex_U(points), rel=1e-2, abs=1e-5)

    def test_tail_model_beyond_grid(self, small_grid):
        field = IterateField.from_function(small_grid, lambda p: p / np.sum(p ** 2, axis=-1)[:, None] ** 1.25, 0.5)
        far = np.array([[100.0, 0.0]])
        assert field(far) == pytest.approx(far / 100.0 ** 2.5, rel=1e-6)

    def test_weighted_norm(self, small_grid):
        field = IterateField.zeros(small_grid, 0.5)
        assert field.weighted_norm() == 0.0
        values = np.zeros_like(field.values)
        values[-1, 0] = [1.0, 0.0]
        bumped = field.with_values(values)
        assert bumped.weighted_norm() == pytest.approx(33.0 ** 1.5)
        assert bumped.weighted_norm(2.0) == float('inf')

    def test_tail_fit_uses_two_outer_rings(self, small_grid):
        # x / |x|^2.5 = e(theta) / rho^1.5: c(theta) = e(theta)
        field = IterateField.from_function(small_grid, lambda p: p / np.sum(p ** 2, axis=-1)[:, None] ** 1.25, 0.5)
        directions = small_grid.points[-1] / small_grid.rho[-1]
        assert field.tail_fit_residual() == pytest.approx(0.0, abs=1e-12)
        values = field.values.copy()
        values[-1] *= 1.2
        perturbed = field.with_values(values)
        # le dernier anneau seul donnerait un écart de 0.2
        assert np.max(np.abs(perturbed.tail_coefficients - directions)) < 0.1
        assert perturbed.tail_fit_residual() > 0.01

    def test_divergence_of_gridded_vortex(self, small_grid):
        field = IterateField.from_function(small_grid, vortex_U, 0.5)
        nodes = small_grid.points[1:-1].reshape(-1, 2)
        scale = np.max(np.abs(field.gradient(nodes)))
        assert np.max(np.abs(field.divergence(nodes))) <= 0.05 * scale

    def test_shape_mismatch(self, small_grid):
        with pytest.raises(DomainError):
            IterateField(small_grid, np.zeros((3, 3, 2)), 0.5)


# =============================================================================
# TESTS: Formulation faible
# =============================================================================

class TestWeakForm:
    def test_curl_gaussian_is_divergence_free(self):
        phi = CurlGaussian((0.5, -0.2), 0.7)
        points = np.array([[0.3, 0.1], [1.0, -1.0]])
        grad = phi.gradient(points)
        assert grad[:, 0, 0] + grad[:, 1, 1] == pytest.approx([0.0, 0.0], abs=1e-14)

    def test_vortex_is_a_weak_solution(self, budget):
        residual, residuals = weak_form_residual(vortex_U, None, vortex_forcing, 1.3, budget=budget)
        assert len(residuals) == len(default_test_functions())
        assert residual < 1e-6

    def test_vortex_convection_is_a_gradient(self, budget):
        residual, _ = weak_form_residual(vortex_U, None, vortex_forcing, -0.7, budget=budget, nonlinear=True)
        assert residual < 1e-6

    def test_wrong_force_is_detected(self, budget):
        residual, _ = weak_form_residual(vortex_U, None, lambda p: np.zeros((len(p), 2)), 1.0, budget=budget)
        assert residual > 1e-3


def _exact_vortex(points):
    return vortex_U(points), np.zeros(len(points))


class TestRuleWeakResidual:
    def test_vortex_passes_on_fixed_rule(self, loose_budget):
        checks = rule_weak_residual(_exact_vortex, vortex_forcing, 1.3, budget=loose_budget)
        assert len(checks) == len(default_test_functions())
        assert all(c.passed for c in checks)
        assert all(c.velocity_error == 0.0 for c in checks)

    def test_wrong_force_is_detected(self, loose_budget):
        checks = rule_weak_residual(_exact_vortex, lambda p: np.zeros((len(p), 2)), 1.0, budget=loose_budget)
        assert not all(c.passed for c in checks)
        assert max(abs(c.residual) for c in checks) > 1e-3

    def test_tolerance_follows_reported_errors(self, loose_budget):
        phi = default_test_functions()[0]
        exact, = rule_weak_residual(_exact_vortex, vortex_forcing, 1.0, [phi], loose_budget)
        noisy, = rule_weak_residual(lambda p: (vortex_U(p), np.full(len(p), 1e-4)), vortex_forcing, 1.0,
                                    [phi], loose_budget)
        points, weights = weak_rule(phi)
        propagated = 1e-4 * np.sum(weights.ravel() * np.linalg.norm(phi.adjoint_operator(points, 1.0), axis=-1))
        assert noisy.velocity_error == pytest.approx(propagated)
        assert noisy.tolerance == pytest.approx(exact.tolerance + 10.0 * propagated)
        assert noisy.to_dict()['passed']

    def test_velocity_is_evaluated_once(self, loose_budget):
        calls = []

        def velocity(points):
            calls.append(len(points))
            return _exact_vortex(points)

        rule_weak_residual(velocity, vortex_forcing, 1.0, budget=loose_budget)
        assert calls == [sum(len(weak_rule(phi)[0]) for phi in default_test_functions())]

    @pytest.mark.slow
    def test_linear_solution_pointforce(self, loose_budget):
        checks = linear_weak_residual(rot_bump(1.0), 1.0, loose_budget, [default_test_functions()[0]])
        assert all(c.passed for c in checks)

    @pytest.mark.slow
    def test_linear_solution_divform(self, loose_budget):
        checks = linear_weak_residual(divform_gauss(1.0, antisymmetric=0.5), 1.0, loose_budget,
                                      [default_test_functions()[0]])
        assert all(c.passed for c in checks)


# =============================================================================
# TESTS: Chemin du noyau dominant
# =============================================================================

class TestFarPath:
    def test_no_estimate_inside_unit_disk(self, loose_budget):
        assert far_path_error(rot_bump(1.0), 1.0, [0.5, 0.0], loose_budget) is None

    def test_branch_uses_truncated_moment(self, budget):
        force = rot_bump(1.0)
        x = np.array([30.0, 40.0])
        with patch('src.solver.linear.far_path_error', return_value=0.0):
            velocity, _ = probe_velocity(force, 1.0, x, budget)
        moment, _ = truncated_moment(force, 25.0, budget)
        assert velocity == pytest.approx(moment * rotational_profile(x), rel=1e-12)

    def test_branch_skipped_when_estimate_too_large(self, budget):
        with patch('src.solver.linear.far_path_error', return_value=budget.abs_tol), \
                patch('src.solver.linear.truncated_moment') as moment:
            probe_velocity(zero_force(), 1.0, np.array([30.0, 40.0]), budget)
        moment.assert_not_called()

    @pytest.mark.slow
    def test_estimate_decreases_with_distance(self, loose_budget):
        force = rot_bump(1.0)
        near = far_path_error(force, 1.0, [16.0, 0.0], loose_budget)
        far = far_path_error(force, 1.0, [64.0, 0.0], loose_budget)
        assert 0.0 < far < near

    @pytest.mark.slow
    def test_estimate_bounds_leading_kernel_gap(self, loose_budget):
        force = rot_bump(1.0)
        x = np.array([20.0, 12.0])
        estimate = far_path_error(force, 1.0, x, loose_budget)
        full, error = probe_velocity(force, 1.0, x, loose_budget, use_far_path=False)
        moment, _ = truncated_moment(force, float(np.linalg.norm(x)) / 2.0, loose_budget)
        gap = float(np.linalg.norm(full - moment * rotational_profile(x)))
        assert gap <= estimate + error + loose_budget.tolerance(full)
