"""
Contrôles d'identités: relations exactes entre noyaux, structure de Gamma_a
(symétrie adjointe, covariance par rotation), intégrales en temps et
divergence nulle des vitesses calculées.
"""
import logging
from dataclasses import dataclass, asdict
from typing import Callable, Optional

import numpy as np

from src.kernel.fundamental import (
    b_time_integral, fundamental_solution_batch, grad_fundamental_solution,
    grad_fundamental_solution_fd, gradient_time_integral,
)
from src.kernel.geometry import IDENTITY, outer, rotation
from src.kernel.kernels import (
    DEFAULT_KERNEL_CONFIG, EIGHT_PI, KernelEvalConfig, gauss, kernel_B, kernel_H, kernel_K,
)
from src.quadrature.budget import QuadratureBudget, default_budget
from src.quadrature.line import integrate_1d
from src.verification.audits import BoundAudit, build_audit

logger = logging.getLogger(__name__)

B_TIME_INTEGRAL = np.sqrt(2.0) / (8.0 * np.pi)

# Différences centrées de pas DIVERGENCE_STEP max(|x|, 1)
DIVERGENCE_STEP = 0.05
DIVERGENCE_RELATIVE = 1e-2
# Gradient de spline d'un champ de grille
GRID_DIVERGENCE_RELATIVE = 5e-2
_STENCIL = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass
class IdentityCheck:
    """Écart maximal d'une identité sur un échantillon."""
    name: str
    max_error: float
    tolerance: float
    n_samples: int
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _check(name: str, errors, tolerance: float) -> IdentityCheck:
    errors = np.asarray(errors, dtype=float)
    max_error = float(np.max(errors, initial=0.0))
    check = IdentityCheck(name, max_error, float(tolerance), int(errors.size), bool(max_error <= tolerance))
    logger.info(f"Identité {name}: écart {max_error:.3e} (tolérance {tolerance:.1e}) -> "
                f"{'OK' if check.passed else 'ECHEC'}")
    return check


def _random_points(rng, n: int, scale: float = 5.0) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n, 2))


def k_decomposition_check(n_samples: int = 100, seed: int = 0, tolerance: float = 1e-12,
                          kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> IdentityCheck:
    """K = e^{-|x|^2/4t}/(8 pi t) I + B, écart relatif à |K|."""
    rng = np.random.default_rng(seed)
    x = _random_points(rng, n_samples)
    t = 10.0 ** rng.uniform(-2.0, 2.0, size=n_samples)
    K = kernel_K(x, t, kernel_config)
    rhs = (np.exp(-np.sum(x ** 2, axis=-1) / (4.0 * t)) / (EIGHT_PI * t))[:, None, None] * IDENTITY
    rhs = rhs + kernel_B(x, t, kernel_config)
    scale = np.maximum(np.abs(K).max(axis=(-2, -1)), 1e-300)
    return _check('K = G/2 I + B', np.abs(K - rhs).max(axis=(-2, -1)) / scale, tolerance)


def _hessian_gauss(x, s):
    """grad^2 G(x, s) = G (x (x) x/(4 s^2) - I/(2 s))."""
    return gauss(x, s) * (outer(x, x) / (4.0 * s ** 2) - IDENTITY / (2.0 * s))


def h_time_integral_check(n_samples: int = 10, seed: int = 1, tolerance: float = 1e-8,
                          budget: Optional[QuadratureBudget] = None,
                          kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> IdentityCheck:
    """H(x, t) contre int_t^inf grad^2 G(x, s) ds par quadrature adaptative."""
    budget = (budget or default_budget()).tightened(100.0)
    rng = np.random.default_rng(seed)
    errors = []
    for x, t in zip(_random_points(rng, n_samples, 3.0), 10.0 ** rng.uniform(-1.0, 1.0, n_samples)):
        reference, _ = integrate_1d(lambda s: _hessian_gauss(x, s), (t, np.inf), budget)
        closed = kernel_H(x, t, kernel_config)
        errors.append(np.max(np.abs(closed - reference)) / max(np.max(np.abs(closed)), 1e-300))
    return _check('H = int_t^inf grad^2 G', errors, tolerance)


def series_branch_check(n_samples: int = 20, tolerance: float = 1e-10) -> IdentityCheck:
    """Accord des branches série et forme fermée de H autour du seuil de bascule."""
    rho = np.geomspace(2e-4, 5e-3, n_samples)
    t = 1.0
    theta = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    z = (2.0 * np.sqrt(rho * t))[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    closed = kernel_H(z, t, KernelEvalConfig(series_switch_radius=1e-9))
    series = kernel_H(z, t, KernelEvalConfig(series_switch_radius=0.5))
    scale = np.abs(closed).max(axis=(-2, -1))
    return _check('H série / forme fermée', np.abs(closed - series).max(axis=(-2, -1)) / scale, tolerance)


def _random_triples(rng, n: int, a_range=(0.25, 4.0)):
    a = rng.choice([-1.0, 1.0], size=n) * np.exp(rng.uniform(*np.log(a_range), size=n))
    x = _random_points(rng, n, 4.0)
    y = _random_points(rng, n, 4.0)
    return a, x, y


def adjoint_symmetry_check(n_samples: int = 20, seed: int = 2,
                           budget: Optional[QuadratureBudget] = None,
                           kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> IdentityCheck:
    """Gamma_a(x, y) = Gamma_{-a}(y, x)^T, écart rapporté à deux fois l'erreur de quadrature."""
    budget = budget or default_budget()
    rng = np.random.default_rng(seed)
    ratios = []
    for a, x, y in zip(*_random_triples(rng, n_samples)):
        direct, err_direct = fundamental_solution_batch(a, x, y[None, :], budget, kernel_config)
        adjoint, err_adjoint = fundamental_solution_batch(-a, y, x[None, :], budget, kernel_config)
        allowed = 2.0 * max(budget.tolerance(direct), float(err_direct[0] + err_adjoint[0]))
        ratios.append(np.max(np.abs(direct[0] - adjoint[0].T)) / allowed)
    return _check('Gamma_a(x, y) = Gamma_-a(y, x)^T', ratios, 1.0)


def rotation_covariance_check(n_samples: int = 5, seed: int = 3,
                              budget: Optional[QuadratureBudget] = None,
                              kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> IdentityCheck:
    """Gamma_a(Ox, Oy) = O Gamma_a(x, y) O^T pour des rotations aléatoires."""
    budget = budget or default_budget()
    rng = np.random.default_rng(seed)
    ratios = []
    for (a, x, y), angle in zip(zip(*_random_triples(rng, n_samples)), rng.uniform(0, 2 * np.pi, n_samples)):
        O = rotation(angle)
        base, err_base = fundamental_solution_batch(a, x, y[None, :], budget, kernel_config)
        turned, err_turned = fundamental_solution_batch(a, O @ x, (O @ y)[None, :], budget, kernel_config)
        allowed = 2.0 * max(budget.tolerance(base), float(err_base[0] + err_turned[0]))
        ratios.append(np.max(np.abs(turned[0] - O @ base[0] @ O.T)) / allowed)
    return _check('Gamma_a(Ox, Oy) = O Gamma_a O^T', ratios, 1.0)


def gradient_consistency_check(a: float = 1.0, samples=None, tolerance: float = 1e-4,
                               budget: Optional[QuadratureBudget] = None,
                               kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> IdentityCheck:
    """grad_y Gamma_a (intégrale en temps de grad K) contre différences finies centrées."""
    budget = budget or default_budget()
    if samples is None:
        samples = [((4.0, 0.0), (0.5, 0.0)), ((1.0, 2.0), (-0.5, 0.3)), ((-3.0, 1.0), (0.2, -0.7))]
    errors = []
    for x, y in samples:
        grad, _ = grad_fundamental_solution(a, x, y, budget=budget, kernel_config=kernel_config)
        fd, _ = grad_fundamental_solution_fd(a, x, y, budget, kernel_config)
        errors.append(np.max(np.abs(grad - fd)) / max(np.max(np.abs(grad)), 1e-300))
    return _check('grad_y Gamma_a / différences finies', errors, tolerance)


def b_time_integral_check(points=((0.1, 0.0), (1.0, 1.0), (-7.0, 3.0)), tolerance: float = 1e-6,
                          budget: Optional[QuadratureBudget] = None) -> IdentityCheck:
    """int_0^inf |B(z, t)| dt = sqrt(2)/(8 pi), indépendant de z."""
    budget = budget or default_budget()
    errors = [abs(b_time_integral(z, budget) - B_TIME_INTEGRAL) / B_TIME_INTEGRAL for z in points]
    return _check('int |B| dt = sqrt(2)/(8 pi)', errors, tolerance)


def gradient_time_integral_audit(a: float = 1.0, radii=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
                                 budget: Optional[QuadratureBudget] = None) -> BoundAudit:
    """int_0^inf |grad K(O(at)x, t)| dt <= C/|x|: rapports |x| * intégrale."""
    budget = budget or default_budget()
    ratios = [r * gradient_time_integral(a, (r, 0.0), budget) for r in radii]
    # constante exacte par changement d'échelle t = |x|^2 s: pas de test de tendance
    return build_audit('grad_K_time_integral', ratios)


# =============================================================================
# Divergence nulle
# =============================================================================

def finite_difference_gradient(velocity: Callable, points, step: float = DIVERGENCE_STEP):
    """Jacobien d u_j / d x_k par différences centrées, pas h = step max(|x|, 1).

    velocity(points) retourne (u, erreurs) comme un solveur linéaire.
    Retourne (gradient (n, k, j), bruit (n,)): le bruit majore l'effet des
    erreurs de quadrature sur la divergence discrète.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    h = step * np.maximum(np.linalg.norm(points, axis=-1), 1.0)
    stencil = points[:, None, :] + h[:, None, None] * _STENCIL[None]
    u, errors = velocity(stencil.reshape(-1, 2))
    u = np.asarray(u, dtype=float).reshape(len(points), 4, 2)
    errors = np.asarray(errors, dtype=float).reshape(len(points), 4)
    gradient = np.stack([u[:, 0] - u[:, 1], u[:, 2] - u[:, 3]], axis=1) / (2.0 * h[:, None, None])
    return gradient, np.sum(errors, axis=1) / (2.0 * h)


def divergence_check(name: str, divergence, gradient, noise=0.0,
                     relative: float = DIVERGENCE_RELATIVE) -> IdentityCheck:
    """|div u| <= bruit max + relative * max |grad u| sur l'échantillon."""
    gradient = np.asarray(gradient, dtype=float)
    tolerance = float(np.max(noise, initial=0.0)) + relative * float(np.max(np.abs(gradient), initial=0.0))
    return _check(name, np.abs(divergence), tolerance)


def velocity_divergence_check(name: str, velocity: Callable, points, step: float = DIVERGENCE_STEP,
                              relative: float = DIVERGENCE_RELATIVE) -> IdentityCheck:
    """div u aux points par différences finies sur une vitesse calculée point par point."""
    gradient, noise = finite_difference_gradient(velocity, points, step)
    return divergence_check(name, gradient[:, 0, 0] + gradient[:, 1, 1], gradient, noise, relative)


def field_divergence_check(name: str, field, points,
                           relative: float = GRID_DIVERGENCE_RELATIVE) -> IdentityCheck:
    """div u d'un champ portant divergence() et gradient() (IterateField, NonlinearSolution)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return divergence_check(name, field.divergence(points), field.gradient(points), relative=relative)
