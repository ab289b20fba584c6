"""
Vérification: normes à poids, exposants de décroissance, audits de bornes et identités.
"""
from src.verification.audits import (
    BoundAudit, DecayFit, LogMomentFit,
    weighted_norm, extract_rotational_coefficient,
    fit_decay, fit_decay_samples, fit_solution_decay,
    build_audit, combine_audits, default_lemma21_samples, audit_lemma21,
    theorem_shape, audit_theorem_bounds, log_moment_fit, vortex_moment_check,
)
from src.verification.identities import (
    IdentityCheck, k_decomposition_check, h_time_integral_check, series_branch_check,
    adjoint_symmetry_check, rotation_covariance_check, gradient_consistency_check,
    b_time_integral_check, gradient_time_integral_audit,
    finite_difference_gradient, divergence_check, velocity_divergence_check, field_divergence_check,
)
