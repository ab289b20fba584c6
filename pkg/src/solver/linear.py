"""
Problème linéaire (S_a) dans le plan:

    -Delta u - a (x^perp . grad u - u^perp) + grad p = f,   div u = 0.

Vitesse u(x) = int Gamma_a(x, y) f(y) dy (force ponctuelle) ou
u(x) = -int grad_y Gamma_a(x, y) : F(y) dy (forme divergence), pression par
le potentiel (1/2 pi) int (x-y)/|x-y|^2 . f(y) dy, et décomposition
u = c(x) x^perp/(4 pi |x|^2) + reste.

Quadrature en y: partition de l'unité lisse autour de la sonde. La partie
proche (disque de rayon delta centré en x, règle polaire graduée vers x)
absorbe la singularité logarithmique de Gamma_a; la partie lointaine utilise
une règle polaire centrée à l'origine dont les cercles de découpe suivent
|y| = |x|/2. Sur |y| < |x|/2 le noyau dominant L remplace Gamma_a quand la
borne de champ lointain le permet.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.errors import ConvergenceFailure, DomainError
from src.kernel.fundamental import (
    far_field_bound_shape, fundamental_solution_batch, grad_fundamental_solution_batch,
)
from src.kernel.geometry import as_vec, norm2, perp
from src.kernel.kernels import DEFAULT_KERNEL_CONFIG, KernelEvalConfig, grad_leading_kernel, leading_kernel
from src.quadrature.budget import DecayClass, QuadratureBudget, default_budget
from src.quadrature.plane import (
    BASE_ANGLES, Region, graded_edges, integrate_region, merge_edges, polar_nodes,
    radial_edges, refine_rule, singular_potential, subdivide,
)
from src.solver.forces import ForceSpec, force_weighted_norm, plateau_cutoff
from src.solver.pool import map_ordered

logger = logging.getLogger(__name__)

# Niveaux de raffinement de la quadrature en y (k = 1, 2, 4)
NESTED_MAX_LEVEL = 2
FAR_ANGLES = 2 * BASE_ANGLES
# Chemin du noyau dominant: erreur calibrée < FAR_PATH_FRACTION * abs_tol
FAR_PATH_FRACTION = 0.25
FAR_CALIBRATION_FRACTION = 0.4
FAR_CALIBRATION_SAFETY = 2.0
_CALIBRATION_ANGLES = np.pi * np.array([0.1, 0.6, 1.1, 1.6])


def rotational_profile(points) -> np.ndarray:
    """x^perp / (4 pi |x|^2), nul en x = 0."""
    points = as_vec(points)
    r2 = norm2(points)
    safe = np.where(r2 > 0, r2, 1.0)
    return np.where((r2 > 0)[..., None], perp(points) / (4.0 * np.pi * safe[..., None]), 0.0)


@dataclass
class LinearSolution:
    """Échantillons de la solution linéaire aux points de sonde."""
    kind: str
    a: float
    r: float
    probes: np.ndarray
    velocity: np.ndarray
    pressure: np.ndarray
    moment: np.ndarray          # m(|x|/2), ou int_{|y|<|x|/2} (F12 - F21) en forme divergence
    remainder: np.ndarray
    errors: np.ndarray
    force_name: str = 'custom'
    force_norm: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def leading(self) -> np.ndarray:
        return self.moment[:, None] * rotational_profile(self.probes)

    def rows(self) -> List[dict]:
        """Lignes CSV: x1, x2, u1, u2, p, moment, rem1, rem2, err_est."""
        return [
            {
                'x1': x[0], 'x2': x[1], 'u1': u[0], 'u2': u[1], 'p': p,
                'moment': m, 'rem1': rem[0], 'rem2': rem[1], 'err_est': e,
            }
            for x, u, p, m, rem, e in zip(self.probes, self.velocity, self.pressure,
                                           self.moment, self.remainder, self.errors)
        ]


# =============================================================================
# Géométrie de la quadrature en y
# =============================================================================

def _split_radius(rx: float) -> float:
    """Rayon delta du disque proche centré sur la sonde."""
    return 0.5 * max(rx, 1.0)


def kernel_truncation(decay: DecayClass, rx: float, budget: QuadratureBudget):
    """Rayon de troncature en y pour int |Gamma_a(x, y)| |f(y)| dy.

    Au-delà de 2|x|, |Gamma_a(x, y)| <= (1 + |x|)/(4 pi |y|) (profil miroir), d'où
    une queue (1 + |x|) M (1 + R)^(1-s) / (2 (s - 1)).
    """
    if decay.support_radius is not None:
        return decay.support_radius, 0.0
    s, M = decay.exponent, decay.bound
    if s <= 1:
        raise DomainError(f"Exposant de décroissance {s} <= 1: convolution non convergente")
    scale = (1.0 + rx) * M / (2.0 * (s - 1.0))
    radius = (0.5 * budget.abs_tol / scale) ** (1.0 / (1.0 - s)) - 1.0
    radius = max(radius, 2.0 * rx, 1.0)
    if radius > budget.truncation_radius_cap:
        radius = max(budget.truncation_radius_cap, 2.0 * rx)
        logger.warning(f"Troncature en y plafonnée à R={radius:g} pour |x|={rx:g}")
    return radius, scale * (1.0 + radius) ** (1.0 - s)


def _antisymmetric_part(values) -> np.ndarray:
    return values[:, 0, 1] - values[:, 1, 0]


def leading_density(force: ForceSpec):
    """Densité scalaire du coefficient dominant: y^perp . f, ou F12 - F21."""
    if force.is_pointwise:
        return lambda p: np.sum(perp(p) * force(p), axis=-1)
    return lambda p: _antisymmetric_part(force(p))


def truncated_moment(force: ForceSpec, radius: float, budget: QuadratureBudget):
    """int_{|y| < radius} de la densité dominante (moment tronqué m(radius))."""
    if radius <= 0:
        return 0.0, 0.0
    value, error = integrate_region(leading_density(force), Region.disk(radius), budget, force.decay)
    return float(value), float(error)


def _green_contract(force: ForceSpec, a: float, x, ys, values, budget, kernel_config):
    """Gamma_a(x, y) f(y) ou -grad_y Gamma_a(x, y) : F(y) aux noeuds, et erreur par noeud."""
    flat = np.abs(values.reshape(len(values), -1))
    active = np.any(flat > 0, axis=1)
    out = np.zeros((len(ys), 2))
    err = np.zeros(len(ys))
    if not np.any(active):
        return out, err
    magnitude = np.sqrt(np.sum(flat[active] ** 2, axis=1))
    if force.is_pointwise:
        gamma, gamma_err = fundamental_solution_batch(a, x, ys[active], budget, kernel_config)
        out[active] = np.einsum('nij,nj->ni', gamma, values[active])
    else:
        grad, gamma_err = grad_fundamental_solution_batch(a, x, ys[active], budget, kernel_config)
        out[active] = -np.einsum('nkij,njk->ni', grad, values[active])
    err[active] = gamma_err * magnitude
    return out, err


def far_path_error(force: ForceSpec, a: float, x, budget: QuadratureBudget,
                   kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> Optional[float]:
    """Borne de l'erreur commise en remplaçant Gamma_a par L sur |y| < |x|/2.

    La forme de borne est calibrée par sa constante: C = 2 max |Gamma_a - L| / forme
    sur quelques noeuds du disque (origine, cercles de rayon 0.4|x| et du support).
    Retourne C int_{|y|<|x|/2} forme(x, y) |f(y)| dy, ou None si |x| < 1 ou si
    l'évaluation de calibration échoue.
    """
    x = as_vec(x)
    rx = float(np.sqrt(norm2(x)))
    if rx < 1.0:
        return None
    order = 0 if force.is_pointwise else 1
    radii = {0.0, FAR_CALIBRATION_FRACTION * rx}
    if force.decay.support_radius is not None:
        radii.add(min(force.decay.support_radius, FAR_CALIBRATION_FRACTION * rx))
    directions = np.stack([np.cos(_CALIBRATION_ANGLES), np.sin(_CALIBRATION_ANGLES)], axis=-1)
    ys = np.unique(np.concatenate([radius * directions for radius in sorted(radii)]), axis=0)
    try:
        if order == 0:
            gamma, _ = fundamental_solution_batch(a, x, ys, budget, kernel_config)
            observed = np.linalg.norm((gamma - leading_kernel(x, ys)).reshape(len(ys), -1), axis=-1)
        else:
            grad, _ = grad_fundamental_solution_batch(a, x, ys, budget, kernel_config)
            observed = np.linalg.norm((grad - grad_leading_kernel(x)).reshape(len(ys), -1), axis=-1)
    except ConvergenceFailure as e:
        logger.debug(f"Calibration du champ lointain impossible en {x.tolist()}: {e}")
        return None
    constant = FAR_CALIBRATION_SAFETY * float(np.max(observed / far_field_bound_shape(a, x, ys, order)))

    def weighted(points):
        magnitude = np.sqrt(np.sum(force(points).reshape(len(points), -1) ** 2, axis=1))
        return far_field_bound_shape(a, x, points, order) * magnitude

    integral, _ = integrate_region(weighted, Region.disk(rx / 2.0), budget, force.decay)
    return constant * float(integral)


def probe_velocity(force: ForceSpec, a: float, x, budget: QuadratureBudget,
                   kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG,
                   use_far_path: bool = True):
    """Vitesse au point x par quadrature emboîtée y (polaire) x t (oscillante).

    Returns:
        (vitesse (2,), estimation d'erreur)
    """
    x = as_vec(x)
    rx = float(np.sqrt(norm2(x)))
    delta = _split_radius(rx)
    radius, tail = kernel_truncation(force.decay, rx, budget)
    support = force.decay.support_radius

    inner = 0.0
    leading = np.zeros(2)
    far_error = far_path_error(force, a, x, budget, kernel_config) if use_far_path else None
    if far_error is not None and far_error < FAR_PATH_FRACTION * budget.abs_tol:
        coefficient, moment_err = truncated_moment(force, rx / 2.0, budget)
        leading = coefficient * rotational_profile(x)
        inner = rx / 2.0
        tail += far_error + moment_err * float(np.linalg.norm(rotational_profile(x)))
        logger.debug(f"Sonde |x|={rx:g}: noyau dominant sur |y| < {inner:g} (erreur {far_error:.2e})")

    near_active = support is None or rx - delta < support
    cuts = [rx / 2.0, rx - delta, rx - 0.5 * delta, rx, rx + 0.5 * delta, rx + delta]
    if support is not None:
        cuts.append(support)
    far_edges = merge_edges(radial_edges(inner, radius), cuts, radius)

    def evaluate(k: int):
        total = leading.copy()
        error = 0.0
        n_nodes = 0
        if near_active:
            points, weights, _, _ = polar_nodes(subdivide(graded_edges(delta), k), BASE_ANGLES * k, center=x)
            values = force(points) * _near_weight(points, x, delta, force)
            contrib, err = _green_contract(force, a, x, points, values, budget, kernel_config)
            total += np.tensordot(weights, contrib, axes=(0, 0))
            error += float(np.dot(weights, err))
            n_nodes += len(weights)
        if radius > inner:
            points, weights, _, _ = polar_nodes(subdivide(far_edges, k), FAR_ANGLES * k)
            values = force(points) * (1.0 - _near_weight(points, x, delta, force))
            contrib, err = _green_contract(force, a, x, points, values, budget, kernel_config)
            total += np.tensordot(weights, contrib, axes=(0, 0))
            error += float(np.dot(weights, err))
            n_nodes += len(weights)
        return total, n_nodes, error

    return refine_rule(evaluate, budget, tail, f"vitesse en {x.tolist()}", max_level=NESTED_MAX_LEVEL)


def _near_weight(points, x, delta: float, force: ForceSpec) -> np.ndarray:
    """chi(|y - x|/delta), diffusé sur la forme des valeurs de la force."""
    chi = plateau_cutoff(np.sqrt(norm2(points - x)) / delta)
    return chi.reshape((-1,) + (1,) * (1 if force.is_pointwise else 2))


# =============================================================================
# Pression
# =============================================================================

def density_decay(force: ForceSpec) -> DecayClass:
    """Classe de décroissance de la densité f (div F gagne une puissance)."""
    if force.is_pointwise:
        return force.decay
    d = force.decay
    return DecayClass(d.exponent + 1.0, 4.0 * d.bound, d.support_radius)


def pressure_pointforce(force: ForceSpec, x, budget: Optional[QuadratureBudget] = None) -> float:
    """p(x) = (1/2 pi) int (x-y)/|x-y|^2 . f(y) dy."""
    budget = budget or default_budget()
    value, _ = singular_potential(x, force.pointwise_density, density_decay(force), budget)
    return float(value)


# =============================================================================
# Solveurs
# =============================================================================

def _check_linear_inputs(force: ForceSpec, a: float, kind: str, budget: QuadratureBudget):
    if a == 0:
        raise DomainError("a = 0: pas de solution fondamentale (paradoxe de Stokes)")
    if force.kind != kind:
        raise DomainError(f"Force '{force.name}' de type {force.kind}, {kind} attendu")
    force.spot_check(budget.truncation_radius_cap)


def _solve(force: ForceSpec, a: float, probes, budget, r, workers, kernel_config, with_pressure):
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    def solve_probe(x):
        try:
            velocity, error = probe_velocity(force, a, x, budget, kernel_config)
            moment, moment_err = truncated_moment(force, float(np.sqrt(norm2(x))) / 2.0, budget)
            pressure = pressure_pointforce(force, x, budget) if with_pressure else np.nan
        except ConvergenceFailure as e:
            logger.error(f"Échec de quadrature à la sonde {x.tolist()}: {e}")
            raise e.annotate(f"sonde x={x.tolist()}") from e
        return velocity, pressure, moment, error + moment_err

    logger.info(f"Solveur linéaire ({force.kind}, '{force.name}'): {len(probes)} sondes, a={a:g}")
    results = map_ordered(solve_probe, probes, workers)
    velocity = np.array([res[0] for res in results]).reshape(-1, 2)
    pressure = np.array([res[1] for res in results], dtype=float)
    moment = np.array([res[2] for res in results], dtype=float)
    errors = np.array([res[3] for res in results], dtype=float)
    remainder = velocity - moment[:, None] * rotational_profile(probes)
    base = 3.0 if force.is_pointwise else 2.0
    if r is None:
        r = min(max(0.0, force.decay.exponent - base), 0.99)
    return LinearSolution(
        kind=force.kind, a=a, r=float(r), probes=probes, velocity=velocity,
        pressure=pressure, moment=moment, remainder=remainder, errors=errors,
        force_name=force.name,
        force_norm=force_weighted_norm(force, base + r, budget.truncation_radius_cap),
    )


def solve_linear_pointforce(force: ForceSpec, a: float, probes, budget: Optional[QuadratureBudget] = None,
                            r: Optional[float] = None, workers: Optional[int] = None,
                            kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG,
                            with_pressure: bool = True) -> LinearSolution:
    """u = int Gamma_a(x, .) f, pression, moment tronqué m(|x|/2) et reste."""
    budget = budget or default_budget()
    _check_linear_inputs(force, a, 'pointwise', budget)
    return _solve(force, a, probes, budget, r, workers, kernel_config, with_pressure)


def solve_linear_divform(force: ForceSpec, a: float, probes, budget: Optional[QuadratureBudget] = None,
                         r: Optional[float] = None, workers: Optional[int] = None,
                         kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG,
                         with_pressure: bool = True) -> LinearSolution:
    """u = -int grad_y Gamma_a(x, .) : F, coefficient int_{|y|<|x|/2} (F12 - F21) et reste."""
    budget = budget or default_budget()
    _check_linear_inputs(force, a, 'divergence_form', budget)
    return _solve(force, a, probes, budget, r, workers, kernel_config, with_pressure)


def solve_linear(force: ForceSpec, a: float, probes, budget: Optional[QuadratureBudget] = None,
                 **kwargs) -> LinearSolution:
    """Aiguille vers le solveur ponctuel ou en forme divergence selon la force."""
    if force.is_pointwise:
        return solve_linear_pointforce(force, a, probes, budget, **kwargs)
    return solve_linear_divform(force, a, probes, budget, **kwargs)


def probe_geometry(rays: int = 8, radii=(1, 2, 4, 8, 16, 32, 64), offset: float = 0.0) -> np.ndarray:
    """Sondes par défaut: rays rayons x rayons géométriques, forme (rays*len(radii), 2)."""
    theta = offset + 2.0 * np.pi * np.arange(rays) / rays
    radii = np.asarray(radii, dtype=float)
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return (radii[None, :, None] * directions[:, None, :]).reshape(-1, 2)
