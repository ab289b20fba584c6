"""
Quadrature adaptative 1-D (Gauss-Kronrod via scipy) et règles de Gauss-Legendre composites.
"""
import logging
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import quad_vec

from src.errors import ConvergenceFailure
from src.quadrature.budget import QuadratureBudget

logger = logging.getLogger(__name__)

# quad_vec utilise la règle de Gauss-Kronrod à 21 points par défaut
_GK21_EVALS = 21


@lru_cache(maxsize=32)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Noeuds et poids de Gauss-Legendre sur [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(edges, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Règle de Gauss-Legendre composite sur les panneaux [edges[i], edges[i+1]]."""
    edges = np.asarray(edges, dtype=float)
    nodes, weights = gauss_legendre(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    points = (lo + hi) * 0.5 + half * nodes[None, :]
    return points.ravel(), (half * weights[None, :]).ravel()


def integrate_1d(f: Callable, interval, budget: QuadratureBudget, points=None):
    """Intègre f (scalaire, vecteur ou matrice) sur interval avec contrôle d'erreur.

    Les singularités intégrables aux bornes sont acceptées (les noeuds de
    Kronrod n'incluent pas les extrémités). Les bornes infinies sont gérées
    par le changement de variable interne de quad_vec.

    Returns:
        (valeur, estimation d'erreur)

    Raises:
        ConvergenceFailure: budget épuisé, avec la meilleure valeur partielle.
    """
    lo, hi = interval
    limit = max(2, budget.max_evals // _GK21_EVALS)
    value, error, info = quad_vec(
        f, lo, hi,
        epsabs=budget.abs_tol,
        epsrel=budget.rel_tol,
        norm='max',
        limit=limit,
        points=points,
        full_output=True,
    )
    if not info.success:
        logger.debug(f"quad_vec: statut {info.status}, {info.neval} évaluations, erreur {error:.3e}")
        raise ConvergenceFailure(
            f"Quadrature 1-D non convergée sur [{lo}, {hi}] (statut {info.status}, erreur {error:.3e})",
            value=value, error=error,
        )
    return value, error
