"""
Champ itéré sur grille polaire: valeurs aux noeuds, interpolation bicubique
en (log rho, theta), modèle de queue c(theta)/rho^(1+r) au-delà de la grille
(ajusté sur les deux derniers anneaux) et modèle affine à l'intérieur du premier anneau.
"""
import logging
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from src.errors import DomainError
from src.solver.polar import PolarGrid

logger = logging.getLogger(__name__)

# Angles recopiés de part et d'autre pour la périodicité de la spline
_PAD = 3


class IterateField:
    """Champ de vecteurs du plan représenté sur une PolarGrid."""

    def __init__(self, grid: PolarGrid, values, r: float):
        values = np.asarray(values, dtype=float)
        if values.shape != (len(grid.rho), grid.n_angles, 2):
            raise DomainError(f"Valeurs de forme {values.shape} incompatibles avec la grille")
        if not 0.0 <= r < 1.0:
            raise DomainError(f"r={r} hors de [0, 1)")
        self.grid = grid
        self.values = values
        self.r = r
        self.tail_exponent = 1.0 + r
        self._splines = None
        self._tail = None
        self._inner = None

    # -------------------------------------------------------------------------
    # Constructeurs
    # -------------------------------------------------------------------------

    @classmethod
    def zeros(cls, grid: PolarGrid, r: float) -> "IterateField":
        return cls(grid, np.zeros((len(grid.rho), grid.n_angles, 2)), r)

    @classmethod
    def from_function(cls, grid: PolarGrid, fn: Callable, r: float) -> "IterateField":
        points = grid.points
        return cls(grid, np.asarray(fn(points.reshape(-1, 2))).reshape(points.shape), r)

    def with_values(self, values) -> "IterateField":
        return IterateField(self.grid, values, self.r)

    def __sub__(self, other: "IterateField") -> "IterateField":
        return self.with_values(self.values - other.values)

    # -------------------------------------------------------------------------
    # Modèles
    # -------------------------------------------------------------------------

    @property
    def tail_coefficients(self) -> np.ndarray:
        """c(theta_k) ajusté aux moindres carrés sur les deux derniers anneaux.

        Modèle w(rho, theta) = c(theta) / rho^(1+r):
        c = sum_i rho_i^-b w_i / sum_i rho_i^-2b.
        """
        scale = self.grid.rho[-2:] ** -self.tail_exponent
        return np.einsum('i,ikj->kj', scale, self.values[-2:]) / np.sum(scale ** 2)

    def tail_fit_residual(self) -> float:
        """Écart relatif maximal entre les deux derniers anneaux et le modèle de queue."""
        predicted = self.tail_coefficients[None] / self.grid.rho[-2:, None, None] ** self.tail_exponent
        scale = max(float(np.max(np.abs(self.values[-2:]))), 1e-300)
        return float(np.max(np.abs(predicted - self.values[-2:]))) / scale

    def _build(self):
        grid = self.grid
        n = grid.n_angles
        theta = grid.theta
        theta_ext = np.concatenate([theta[-_PAD:] - 2 * np.pi, theta, theta[:_PAD] + 2 * np.pi])
        log_rho = np.log(grid.rho)
        self._splines = []
        for j in range(2):
            comp = self.values[:, :, j]
            ext = np.concatenate([comp[:, -_PAD:], comp, comp[:, :_PAD]], axis=1)
            self._splines.append(RectBivariateSpline(log_rho, theta_ext, ext, kx=3, ky=3, s=0))
        closed = np.append(theta, 2 * np.pi)
        coeffs = self.tail_coefficients
        self._tail = CubicSpline(closed, np.vstack([coeffs, coeffs[:1]]), bc_type='periodic')
        # modèle affine w ~ A + B x ajusté sur le premier anneau (premières harmoniques)
        ring = self.values[0]
        directions = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        mean = ring.mean(axis=0)
        slope = 2.0 / (n * grid.rho[0]) * np.einsum('kj,kl->jl', ring, directions)
        self._inner = (mean, slope)

    def _ensure(self):
        if self._splines is None:
            self._build()

    # -------------------------------------------------------------------------
    # Évaluation
    # -------------------------------------------------------------------------

    def _regions(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(points[:, 0], points[:, 1])
        theta = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi)
        inner = rho < self.grid.rho[0]
        outer = rho > self.grid.rho[-1]
        middle = ~inner & ~outer
        return points, rho, theta, inner, middle, outer

    def __call__(self, points) -> np.ndarray:
        """w(points), forme (n, 2)."""
        self._ensure()
        points, rho, theta, inner, middle, outer = self._regions(points)
        out = np.zeros((len(points), 2))
        if np.any(middle):
            s = np.log(rho[middle])
            out[middle] = np.stack([sp.ev(s, theta[middle]) for sp in self._splines], axis=-1)
        if np.any(outer):
            out[outer] = self._tail(theta[outer]) / rho[outer, None] ** self.tail_exponent
        if np.any(inner):
            mean, slope = self._inner
            out[inner] = mean + points[inner] @ slope.T
        return out

    def gradient(self, points) -> np.ndarray:
        """d w_j / d x_k, forme (n, k, j)."""
        self._ensure()
        points, rho, theta, inner, middle, outer = self._regions(points)
        out = np.zeros((len(points), 2, 2))
        c, s_ = np.cos(theta), np.sin(theta)
        d_rho = np.zeros((len(points), 2))
        d_theta = np.zeros((len(points), 2))
        if np.any(middle):
            s = np.log(rho[middle])
            d_rho[middle] = np.stack([sp.ev(s, theta[middle], dx=1) for sp in self._splines], axis=-1) / rho[middle, None]
            d_theta[middle] = np.stack([sp.ev(s, theta[middle], dy=1) for sp in self._splines], axis=-1)
        if np.any(outer):
            beta = self.tail_exponent
            coeff = self._tail(theta[outer])
            d_rho[outer] = -beta * coeff / rho[outer, None] ** (beta + 1.0)
            d_theta[outer] = self._tail(theta[outer], 1) / rho[outer, None] ** beta
        mask = middle | outer
        safe = np.where(mask, rho, 1.0)
        out[:, 0, :] = c[:, None] * d_rho - (s_ / safe)[:, None] * d_theta
        out[:, 1, :] = s_[:, None] * d_rho + (c / safe)[:, None] * d_theta
        if np.any(inner):
            _, slope = self._inner
            out[inner] = slope.T
        return out

    def divergence(self, points) -> np.ndarray:
        grad = self.gradient(points)
        return grad[:, 0, 0] + grad[:, 1, 1]

    # -------------------------------------------------------------------------
    # Normes
    # -------------------------------------------------------------------------

    def weighted_norm(self, s: float = None) -> float:
        """sup (1+|x|)^s |w(x)| sur la grille et le modèle de queue (exposant 1+r par défaut).

        (1+rho)^s / rho^(1+r) est décroissant pour s <= 1+r: le sup de la queue
        est atteint en rho_max.
        """
        s = self.tail_exponent if s is None else s
        weights = (1.0 + self.grid.rho) ** s
        grid_sup = float(np.max(weights[:, None] * np.linalg.norm(self.values, axis=-1)))
        coefficients = np.linalg.norm(self.tail_coefficients, axis=-1)
        if s > self.tail_exponent and np.any(coefficients):
            return float('inf')
        rho_max = self.grid.rho[-1]
        tail_sup = (1.0 + rho_max) ** s / rho_max ** self.tail_exponent * float(np.max(coefficients))
        return max(grid_sup, tail_sup)

    def to_rows(self):
        """Lignes CSV: x1, x2, w1, w2."""
        points = self.grid.points.reshape(-1, 2)
        values = self.values.reshape(-1, 2)
        return [{'x1': p[0], 'x2': p[1], 'w1': v[0], 'w2': v[1]} for p, v in zip(points, values)]


def grid_velocity(force, operator, r: float = 0.0) -> IterateField:
    """Solution linéaire sur la grille de l'opérateur polaire (force ponctuelle ou forme divergence)."""
    sources = operator.grid.source_points
    values = force(sources.reshape(-1, 2))
    if force.is_pointwise:
        u = operator.apply_pointforce(values.reshape(sources.shape))
    else:
        u = operator.apply_divform(values.reshape(sources.shape + (2,)))
    return IterateField(operator.grid, u, r)
