"""
Quadratures polaires sur le plan: disque, couronne, extérieur, plan entier,
et potentiel singulier (x-y)/|x-y|^2 centré sur le point d'évaluation.

Règle: Gauss-Legendre par panneau radial x trapèzes en angle (spectral pour
des intégrandes périodiques en theta). Raffinement emboîté jusqu'à ce que
deux niveaux successifs diffèrent de moins de la moitié de la tolérance.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.errors import ConvergenceFailure, DomainError
from src.quadrature.budget import DecayClass, QuadratureBudget
from src.quadrature.line import composite_rule

logger = logging.getLogger(__name__)

RADIAL_ORDER = 8
BASE_ANGLES = 32
MAX_LEVEL = 5


@dataclass(frozen=True)
class Region:
    """Région polaire centrée à l'origine: disque, couronne ou extérieur."""
    kind: str                      # 'disk' | 'annulus' | 'exterior' | 'plane'
    inner: float = 0.0
    outer: Optional[float] = None  # None pour 'exterior' et 'plane'

    def __post_init__(self):
        if self.kind not in ('disk', 'annulus', 'exterior', 'plane'):
            raise DomainError(f"Type de région inconnu: {self.kind}")
        if self.inner < 0 or (self.outer is not None and self.outer < self.inner):
            raise DomainError(f"Région mal formée: {self}")

    @classmethod
    def disk(cls, radius: float) -> "Region":
        return cls('disk', 0.0, float(radius))

    @classmethod
    def annulus(cls, inner: float, outer: float) -> "Region":
        return cls('annulus', float(inner), float(outer))

    @classmethod
    def exterior(cls, radius: float) -> "Region":
        return cls('exterior', float(radius), None)

    @classmethod
    def plane(cls) -> "Region":
        return cls('plane', 0.0, None)

    @property
    def unbounded(self) -> bool:
        return self.outer is None


def graded_edges(outer: float, levels: int = 12) -> np.ndarray:
    """Bords radiaux raffinés géométriquement vers 0: [0, R 2^-levels, ..., R/2, R]."""
    return np.concatenate([[0.0], outer * 2.0 ** -np.arange(levels, -1, -1)])


def merge_edges(edges, extra, outer: float) -> np.ndarray:
    """Ajoute des bords imposés (cercles de découpe) dans [edges[0], outer]."""
    extra = [e for e in extra if edges[0] < e < outer]
    return np.unique(np.concatenate([np.asarray(edges, dtype=float), extra]))


def subdivide(edges, subdivisions: int) -> np.ndarray:
    """Coupe chaque panneau en subdivisions parts égales."""
    edges = np.asarray(edges, dtype=float)
    if subdivisions <= 1:
        return edges
    steps = np.arange(subdivisions) / subdivisions
    inner = (edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * steps[None, :]).ravel()
    return np.append(inner, edges[-1])


def radial_edges(inner: float, outer: float, subdivisions: int = 1) -> np.ndarray:
    """Bords de panneaux radiaux: [0, 1] puis doublement géométrique jusqu'à outer."""
    if outer <= inner:
        return np.array([inner, inner])
    edges = [inner]
    step_end = max(inner * 2.0, inner + 1.0) if inner > 0 else min(1.0, outer)
    while edges[-1] < outer:
        nxt = min(step_end, outer)
        edges.append(nxt)
        step_end = max(2.0 * nxt, nxt + 1.0)
    return subdivide(edges, subdivisions)


def polar_nodes(edges, n_angles: int, center=(0.0, 0.0), angle_offset: float = 0.0):
    """Noeuds (n, 2), poids (n,), rayons et directions de la règle polaire."""
    rho, w_rho = composite_rule(edges, RADIAL_ORDER)
    theta = angle_offset + 2.0 * np.pi * np.arange(n_angles) / n_angles
    w_theta = 2.0 * np.pi / n_angles
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    points = np.asarray(center, dtype=float) + rho[:, None, None] * directions[None, :, :]
    weights = (w_rho * rho)[:, None] * w_theta * np.ones(n_angles)[None, :]
    return points.reshape(-1, 2), weights.ravel(), rho, directions


def refine_rule(evaluate: Callable, budget: QuadratureBudget, tail: float, label: str,
                max_level: int = MAX_LEVEL):
    """Raffinement emboîté: niveau k = panneaux subdivisés 2^k, angles x 2^k.

    evaluate(k) retourne (valeur, nombre d'évaluations) ou
    (valeur, nombre d'évaluations, erreur interne); l'erreur interne du
    dernier niveau s'ajoute à l'estimation.
    """
    previous = None
    evals = 0
    inner = 0.0
    for level in range(max_level + 1):
        result = evaluate(2 ** level)
        value, n_eval = result[0], result[1]
        inner = result[2] if len(result) > 2 else 0.0
        evals += n_eval
        if previous is not None:
            diff = float(np.max(np.abs(value - previous), initial=0.0))
            tol = budget.tolerance(value)
            if diff < 0.5 * tol:
                return value, diff + tail + inner
            if evals >= budget.max_evals:
                break
        previous = value
    error = float(np.max(np.abs(value - previous), initial=0.0)) + tail + inner
    raise ConvergenceFailure(f"Quadrature polaire non convergée ({label}, {evals} évaluations)",
                             value=value, error=error)


def _outer_radius(region: Region, decay: Optional[DecayClass], budget: QuadratureBudget):
    """Rayon extérieur effectif et borne de la queue négligée."""
    if not region.unbounded:
        if decay is not None and decay.support_radius is not None:
            return min(region.outer, max(decay.support_radius, region.inner)), 0.0
        return region.outer, 0.0
    if decay is None:
        raise DomainError("Une région non bornée exige une classe de décroissance")
    if decay.exponent <= 2:
        raise DomainError(f"Intégrale sur le plan non absolument convergente: exposant {decay.exponent} <= 2")
    radius, tail = decay.truncation_radius(0.5 * budget.abs_tol, budget.truncation_radius_cap)
    return max(radius, region.inner), tail


def integrate_region(f: Callable, region: Region, budget: QuadratureBudget,
                     decay: Optional[DecayClass] = None):
    """Intègre f (points (n, 2) -> (n, ...)) sur une région polaire.

    Returns:
        (valeur, estimation d'erreur incluant la borne de queue)
    """
    outer, tail = _outer_radius(region, decay, budget)
    if outer <= region.inner:
        sample = np.asarray(f(np.zeros((1, 2))))
        return np.zeros(sample.shape[1:]), tail

    def evaluate(k: int):
        points, weights, _, _ = polar_nodes(radial_edges(region.inner, outer, k), BASE_ANGLES * k)
        values = np.asarray(f(points), dtype=float)
        return np.tensordot(weights, values, axes=(0, 0)), len(weights)

    return refine_rule(evaluate, budget, tail, f"région {region.kind}")


def integrate_plane(f: Callable, decay: DecayClass, budget: QuadratureBudget):
    """Intègre f sur R^2, tronqué au rayon où la borne de queue < abs_tol/2."""
    return integrate_region(f, Region.plane(), budget, decay)


def singular_potential(x, f: Callable, decay: DecayClass, budget: QuadratureBudget):
    """(1/2pi) int (x-y)/|x-y|^2 . f(y) dy en coordonnées polaires centrées en x.

    Avec y = x + rho*e(theta), le jacobien rho compense la singularité et
    l'intégrande devient -e(theta).f(y)/(2pi), borné.
    """
    x = np.asarray(x, dtype=float)
    if decay.exponent <= 2:
        raise DomainError(f"Potentiel non convergent: exposant {decay.exponent} <= 2")
    norm_x = float(np.linalg.norm(x))
    if decay.support_radius is not None:
        reach, tail = norm_x + decay.support_radius, 0.0
    else:
        s, M = decay.exponent, decay.bound
        target = 0.5 * budget.abs_tol
        # queue |y| > R >= 2|x|: <= 2 M (1+R)^(1-s) / (s-1)
        radius = (target * (s - 1) / (2.0 * M)) ** (1.0 / (1.0 - s)) - 1.0
        radius = max(radius, 2.0 * norm_x)
        cap = budget.truncation_radius_cap
        if radius > cap:
            radius = max(cap, 2.0 * norm_x)
            logger.warning(f"Potentiel singulier tronqué à R={radius:g}")
        tail = 2.0 * M * (1.0 + radius) ** (1.0 - s) / (s - 1.0)
        reach = radius + norm_x

    def evaluate(k: int):
        points, weights, rho, directions = polar_nodes(radial_edges(0.0, reach, k), BASE_ANGLES * k, center=x)
        values = np.asarray(f(points), dtype=float).reshape(len(rho), len(directions), 2)
        # poids polaires sans le facteur rho (compensé par 1/|x-y|)
        w = (weights.reshape(len(rho), len(directions)) / rho[:, None])
        integrand = -np.einsum('ta,rta->rt', directions, values) / (2.0 * np.pi)
        return float(np.sum(w * integrand)), len(weights)

    return refine_rule(evaluate, budget, tail, "potentiel singulier")
