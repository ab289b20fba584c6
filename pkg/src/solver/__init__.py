"""
Solveurs: problème linéaire (S_a), opérateur polaire, itération de Picard (NS_a).
"""
from src.solver.forces import ForceSpec, zero_force, force_weighted_norm, POINTWISE, DIVERGENCE_FORM
from src.solver.linear import (
    LinearSolution, solve_linear, solve_linear_pointforce, solve_linear_divform,
    pressure_pointforce, truncated_moment, rotational_profile, probe_geometry,
)
from src.solver.polar import PolarGrid, PolarGreenOperator
from src.solver.field import IterateField, grid_velocity
from src.solver.nonlinear import (
    vortex_U, laplacian_U, vortex_forcing, compute_alpha, forcing_size,
    PicardReport, PicardSolver, NonlinearSolution, solve_nonlinear, pressure_nonlinear, pressure_on_grid,
    contraction_monotonicity,
)
from src.solver.weak import (
    CurlGaussian, WeakCheck, default_test_functions, weak_form_residual, rule_weak_residual, linear_weak_residual,
)
