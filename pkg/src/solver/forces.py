"""
Description des forces: champ ponctuel f ou tenseur F en forme divergence.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from src.errors import DomainError
from src.quadrature.budget import DecayClass

logger = logging.getLogger(__name__)

POINTWISE = 'pointwise'
DIVERGENCE_FORM = 'divergence_form'

# Pas des différences finies pour div F quand aucune divergence analytique n'est fournie
_DIV_FD_STEP = 1e-5


def smooth_cutoff(radius) -> np.ndarray:
    """psi(rho) = exp(1 - 1/(1 - rho^2)) pour rho < 1, 0 sinon (C-infini, psi(0) = 1)."""
    radius = np.asarray(radius, dtype=float)
    inside = radius < 1.0
    safe = np.where(inside, radius, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe ** 2)), 0.0)


def plateau_cutoff(s) -> np.ndarray:
    """Fonction plateau C-infini: 1 pour s <= 1/2, 0 pour s >= 1."""
    s = np.asarray(s, dtype=float)

    def h(u):
        safe = np.where(u > 0, u, 1.0)
        return np.where(u > 0, np.exp(-1.0 / safe), 0.0)

    num = h(1.0 - s)
    return num / (num + h(s - 0.5))


@dataclass(frozen=True)
class ForceSpec:
    """Force ponctuelle f (points (n, 2) -> (n, 2)) ou tenseur F ((n, 2) -> (n, 2, 2)).

    Pour la forme divergence, f_j = sum_k d_k F_jk.
    """
    kind: str
    field: Callable
    decay: DecayClass
    angular_moment_integrable: bool = True
    name: str = 'custom'
    divergence: Optional[Callable] = None      # div F analytique (forme divergence)
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (POINTWISE, DIVERGENCE_FORM):
            raise DomainError(f"Type de force inconnu: {self.kind}")

    @property
    def is_pointwise(self) -> bool:
        return self.kind == POINTWISE

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.field(np.atleast_2d(np.asarray(points, dtype=float))), dtype=float)

    def pointwise_density(self, points) -> np.ndarray:
        """Densité f: le champ lui-même, ou div F (analytique sinon différences finies)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_pointwise:
            return self(points)
        if self.divergence is not None:
            return np.asarray(self.divergence(points), dtype=float)
        h = _DIV_FD_STEP
        div = np.zeros((len(points), 2))
        for k in range(2):
            step = np.zeros(2)
            step[k] = h
            div += (self(points + step)[:, :, k] - self(points - step)[:, :, k]) / (2.0 * h)
        return div

    def spot_check(self, cap: float, n_samples: int = 256, seed: int = 0) -> None:
        """Vérifie la décroissance déclarée sur des échantillons aléatoires jusqu'à cap."""
        rng = np.random.default_rng(seed)
        radii = cap * rng.random(n_samples) ** 2
        theta = 2.0 * np.pi * rng.random(n_samples)
        points = radii[:, None] * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        self.decay.check(points, self(points))

    def require_moment(self) -> None:
        if not self.angular_moment_integrable:
            raise DomainError(f"Force '{self.name}': y^perp . f n'est pas intégrable (moment angulaire infini)")

    def is_zero(self) -> bool:
        return self.parameters.get('strength', None) == 0.0

    def scaled(self, factor: float) -> "ForceSpec":
        """Force factor * f, classe de décroissance et paramètres ajustés."""
        if factor == 0:
            raise DomainError("Facteur d'échelle nul")
        field_fn, divergence = self.field, self.divergence
        parameters = dict(self.parameters)
        if 'strength' in parameters:
            parameters['strength'] = factor * parameters['strength']
        return replace(
            self,
            field=lambda p: factor * np.asarray(field_fn(p), dtype=float),
            divergence=(lambda p: factor * np.asarray(divergence(p), dtype=float)) if divergence else None,
            decay=replace(self.decay, bound=abs(factor) * self.decay.bound),
            parameters=parameters,
        )


def zero_force(kind: str = POINTWISE, exponent: float = 3.5) -> ForceSpec:
    """Force identiquement nulle."""
    if kind == POINTWISE:
        fn = lambda p: np.zeros((len(p), 2))
    else:
        fn = lambda p: np.zeros((len(p), 2, 2))
    return ForceSpec(kind=kind, field=fn, decay=DecayClass(exponent, 1e-300, support_radius=0.0),
                     name='zero', parameters={'strength': 0.0},
                     divergence=(lambda p: np.zeros((len(p), 2))) if kind != POINTWISE else None)


def envelope_bound(profile: Callable, exponent: float, support: float = 1.0, samples: int = 4001) -> float:
    """Borne M de (1+rho)^s |profil(rho)| sur [0, support], échantillonnée avec 1% de marge."""
    rho = np.linspace(0.0, support, samples)
    return 1.01 * float(np.max((1.0 + rho) ** exponent * np.abs(profile(rho)))) + 1e-300


def sample_points(cap: float, n_radii: int = 64, n_angles: int = 32, inner: float = 1e-2) -> np.ndarray:
    """Origine, puis n_radii rayons géométriques de inner à cap sur n_angles directions."""
    radii = np.concatenate([[0.0], np.geomspace(inner, cap, n_radii)])
    theta = 2.0 * np.pi * np.arange(n_angles) / n_angles
    return (radii[:, None, None] * np.stack([np.cos(theta), np.sin(theta)], -1)[None]).reshape(-1, 2)


def force_weighted_norm(force: ForceSpec, exponent: float, cap: float = 128.0,
                        n_radii: int = 64, n_angles: int = 32) -> float:
    """||f||_{L^inf_s} (ou ||F||_{L^inf_s}, norme de Frobenius) sur un échantillon polaire."""
    points = sample_points(force.decay.support_radius or cap, n_radii, n_angles)
    values = force(points).reshape(len(points), -1)
    weight = (1.0 + np.linalg.norm(points, axis=-1)) ** exponent
    return float(np.max(weight * np.linalg.norm(values, axis=-1)))
