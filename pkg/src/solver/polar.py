"""
Opérateur de Green polaire: discrétisation de f -> int Gamma_a(x, .) f et
F -> -int grad_y Gamma_a(x, .) : F sur une grille polaire.

Sondes x_{p,k} = rho_p e(k D), sources y_{q,m} = r_q e((m + 1/2) D) avec
D = 2 pi / N. La covariance Gamma_a(Ox, Oy) = O Gamma_a(x, y) O^T permet de
ne tabuler que la sonde d'angle 0 contre toutes les sources, une fois par
(a, grille); chaque application est ensuite une contraction.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from src.errors import DomainError
from src.kernel.fundamental import fundamental_solution_batch, grad_fundamental_solution_batch
from src.kernel.geometry import polar_directions, rotation
from src.kernel.kernels import DEFAULT_KERNEL_CONFIG, KernelEvalConfig
from src.quadrature.budget import QuadratureBudget, default_budget
from src.quadrature.line import composite_rule
from src.solver.pool import map_ordered

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolarGrid:
    """Grille polaire: rayons log-espacés x angles uniformes."""
    radii: tuple
    n_angles: int = 32
    source_order: int = 4
    source_outer_factor: float = 2.0

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        if len(radii) < 4 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
            raise DomainError("La grille exige au moins 4 rayons positifs strictement croissants")
        if self.n_angles < 8 or self.n_angles % 2:
            raise DomainError(f"Nombre d'angles invalide: {self.n_angles} (pair, >= 8)")

    @classmethod
    def logarithmic(cls, n_radii: int = 24, inner: float = 0.1, outer: float = 64.0,
                    n_angles: int = 32, **kwargs) -> "PolarGrid":
        return cls(tuple(np.geomspace(inner, outer, n_radii)), n_angles, **kwargs)

    @property
    def rho(self) -> np.ndarray:
        return np.asarray(self.radii, dtype=float)

    @property
    def step(self) -> float:
        return 2.0 * np.pi / self.n_angles

    @property
    def theta(self) -> np.ndarray:
        return polar_directions(self.n_angles)[0]

    @property
    def points(self) -> np.ndarray:
        """Points de la grille, forme (P, K, 2)."""
        _, directions = polar_directions(self.n_angles)
        return self.rho[:, None, None] * directions[None, :, :]

    @cached_property
    def source_rule(self):
        """Rayons et poids (r_q w_q D) des sources; les bords de panneaux sont les rayons sondes."""
        edges = np.concatenate([[0.0], self.rho, [self.source_outer_factor * self.rho[-1]]])
        radii, weights = composite_rule(edges, self.source_order)
        return radii, weights * radii * self.step

    @property
    def source_points(self) -> np.ndarray:
        """Sources, forme (Q, K, 2), décalées d'un demi-pas angulaire."""
        radii, _ = self.source_rule
        _, directions = polar_directions(self.n_angles, offset=0.5 * self.step)
        return radii[:, None, None] * directions[None, :, :]

    def to_dict(self) -> dict:
        return {'radii': list(map(float, self.radii)), 'n_angles': self.n_angles,
                'source_order': self.source_order, 'source_outer_factor': self.source_outer_factor}


class PolarGreenOperator:
    """Tables de Gamma_a et grad_y Gamma_a entre la sonde d'angle 0 et toutes les sources."""

    def __init__(self, a: float, grid: PolarGrid, budget: Optional[QuadratureBudget] = None,
                 workers: Optional[int] = None,
                 kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG):
        if a == 0:
            raise DomainError("a = 0: pas d'opérateur de Green (paradoxe de Stokes)")
        self.a = a
        self.grid = grid
        self.budget = budget or default_budget()
        self.workers = workers
        self.kernel_config = kernel_config
        self.table_error = 0.0
        self._gamma = None
        self._grad = None
        k = np.arange(grid.n_angles)
        self._shift = (k[:, None] + k[None, :]) % grid.n_angles        # (k, d) -> k + d
        self._rotations = rotation(grid.theta)                          # O_k, (K, 2, 2)

    def _sources_flat(self) -> np.ndarray:
        return self.grid.source_points.reshape(-1, 2)

    def _tabulate(self, batch_fn, label: str) -> np.ndarray:
        ys = self._sources_flat()
        q, n = len(self.grid.source_rule[0]), self.grid.n_angles

        def one_probe(rho):
            return batch_fn(self.a, np.array([rho, 0.0]), ys, self.budget, self.kernel_config)

        logger.info(f"Tabulation {label}: {len(self.grid.rho)} rayons x {len(ys)} sources (a={self.a:g})")
        results = map_ordered(one_probe, self.grid.rho, self.workers)
        self.table_error = max([self.table_error] + [float(np.max(err)) for _, err in results])
        return np.stack([values.reshape((q, n) + values.shape[1:]) for values, _ in results])

    @property
    def gamma_table(self) -> np.ndarray:
        """Gamma_a(rho_p e(0), r_q e((d + 1/2) D)), forme (P, Q, K, 2, 2)."""
        if self._gamma is None:
            self._gamma = self._tabulate(fundamental_solution_batch, "Gamma_a")
        return self._gamma

    @property
    def grad_table(self) -> np.ndarray:
        """grad_y Gamma_a, forme (P, Q, K, k, i, j)."""
        if self._grad is None:
            self._grad = self._tabulate(grad_fundamental_solution_batch, "grad Gamma_a")
        return self._grad

    def apply_pointforce(self, source_values) -> np.ndarray:
        """u(x_{p,k}) = sum W_q Gamma_a(x_{p,k}, y_{q,m}) g(y_{q,m}), g de forme (Q, K, 2)."""
        g = np.asarray(source_values, dtype=float)
        _, weights = self.grid.source_rule
        rot = self._rotations
        shifted = g[:, self._shift, :]                                   # (Q, K, D, 2)
        local = np.einsum('kba,qkdb->qkda', rot, shifted)                # O_k^T g
        v = np.einsum('q,pqdia,qkda->pki', weights, self.gamma_table, local, optimize=True)
        return np.einsum('kij,pkj->pki', rot, v)

    def apply_divform(self, source_values) -> np.ndarray:
        """u(x_{p,k}) = -sum W_q grad_y Gamma_a(x_{p,k}, y_{q,m}) : F(y_{q,m}), F de forme (Q, K, 2, 2)."""
        F = np.asarray(source_values, dtype=float)
        _, weights = self.grid.source_rule
        rot = self._rotations
        shifted = F[:, self._shift, :, :]                                # (Q, K, D, 2, 2)
        local = np.einsum('kba,qkdbc,kcl->qkdal', rot, shifted, rot)     # O_k^T F O_k
        v = -np.einsum('q,pqdlab,qkdbl->pka', weights, self.grad_table, local, optimize=True)
        return np.einsum('kij,pkj->pki', rot, v)
