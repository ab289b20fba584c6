"""
Fixtures partagées pour les tests rotflow.
"""
import os
import sys

import numpy as np
import pytest

# Ajouter le répertoire racine au path
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from src.quadrature.budget import DecayClass, QuadratureBudget
from src.solver.forces import POINTWISE, ForceSpec
from src.solver.polar import PolarGrid


@pytest.fixture
def budget():
    """Budget de quadrature modeste pour des tests rapides."""
    return QuadratureBudget(abs_tol=1e-8, rel_tol=1e-6, max_evals=400_000, max_periods=1024,
                            truncation_radius_cap=64.0)


@pytest.fixture
def loose_budget():
    """Budget lâche pour les résolutions complètes."""
    return QuadratureBudget(abs_tol=1e-6, rel_tol=1e-4, max_evals=200_000, max_periods=256,
                            truncation_radius_cap=32.0)


@pytest.fixture
def small_grid():
    """Grille polaire grossière (12 rayons, 16 angles)."""
    return PolarGrid.logarithmic(12, 0.2, 32.0, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gaussian_force():
    """f = y^perp e^{-|y|^2}: moment int y^perp . f = pi."""
    def field(p):
        return np.stack([-p[:, 1], p[:, 0]], axis=-1) * np.exp(-np.sum(p ** 2, axis=-1))[:, None]

    return ForceSpec(POINTWISE, field, DecayClass(4.0, 8.0, support_radius=8.0), name='gauss_perp')
