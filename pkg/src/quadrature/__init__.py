"""
Moteurs d'intégration: 1-D adaptatif, queue oscillante en temps, plan polaire.
"""
from src.quadrature.budget import QuadratureBudget, DecayClass, default_budget
from src.quadrature.line import gauss_legendre, composite_rule, integrate_1d
from src.quadrature.oscillatory import integrate_time_oscillatory, rotation_transpose
from src.quadrature.plane import Region, integrate_region, integrate_plane, singular_potential

__all__ = [
    'QuadratureBudget', 'DecayClass', 'default_budget',
    'gauss_legendre', 'composite_rule', 'integrate_1d',
    'integrate_time_oscillatory', 'rotation_transpose',
    'Region', 'integrate_region', 'integrate_plane', 'singular_potential',
]
