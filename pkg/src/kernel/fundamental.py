"""
Solution fondamentale moyennée par la rotation:

    Gamma_a(x, y) = int_0^inf O(at)^T K(O(at)x - y, t) dt

et son gradient en y. Le terme lent I/(8 pi t) de K ne converge qu'en
moyenne sur les périodes de rotation; il est intégré exactement dans la
queue (voir src.quadrature.oscillatory).
"""
import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from src.errors import DomainError
from src.kernel.geometry import IDENTITY, as_vec, norm2, rotation
from src.kernel.kernels import (
    DEFAULT_KERNEL_CONFIG, EIGHT_PI, KernelEvalConfig, grad_kernel_K, kernel_B, kernel_K,
)
from src.quadrature.budget import QuadratureBudget, default_budget
from src.quadrature.line import integrate_1d
from src.quadrature.oscillatory import integrate_time_oscillatory

logger = logging.getLogger(__name__)

# Coefficient de la partie en 1/t de K quand t -> inf
SLOW_TAIL = IDENTITY / EIGHT_PI


def head_cutoff(a: float, separation: float) -> float:
    """Point de coupure l = (1 + |x - y|)/|a|^(1/2)."""
    return (1.0 + separation) / np.sqrt(abs(a))


def _panels_per_period(radius: float):
    """Sous-panneaux par période: l'argument O(at)x parcourt 2 pi |x| à l'échelle sqrt(t)."""
    def panels(start: float) -> int:
        return 2 + int(np.ceil(np.pi * radius / np.sqrt(start)))
    return panels


def _resolve_budget(budget: Optional[QuadratureBudget], tol: Optional[float]) -> QuadratureBudget:
    budget = budget or default_budget()
    if tol is not None:
        if tol <= 0:
            raise DomainError(f"Tolérance invalide: {tol}")
        budget = replace(budget, abs_tol=tol)
    return budget


def _check_arguments(a: float, x, ys):
    if a == 0:
        raise DomainError(
            "a = 0: Gamma_a diverge logarithmiquement (paradoxe de Stokes, la rotation est requise)"
        )
    x = as_vec(x)
    ys = np.atleast_2d(as_vec(ys))
    if np.any(norm2(ys - x) == 0.0):
        raise DomainError(f"Gamma_a non défini en x = y = {x.tolist()}")
    return x, ys


def _moving_argument(a: float, x, ys, t):
    """z(t) = O(at)x - y, forme (n, m, 2)."""
    ox = np.einsum('nij,j->ni', rotation(a * t), x)
    return ox[:, None, :] - ys[None, :, :]


def fundamental_solution_batch(a: float, x, ys, budget: Optional[QuadratureBudget] = None,
                               kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG,
                               acceleration: str = 'richardson'):
    """Gamma_a(x, y) pour un lot de points y.

    Returns:
        (valeurs (m, 2, 2), erreurs (m,))
    """
    budget = budget or default_budget()
    x, ys = _check_arguments(a, x, ys)

    def integrand(t):
        z = _moving_argument(a, x, ys, t)
        return kernel_K(z, t[:, None], kernel_config)

    separation = float(np.sqrt(norm2(ys - x).max()))
    return integrate_time_oscillatory(
        integrand, a, head_cutoff(a, separation), budget,
        tail_coefficient=SLOW_TAIL,
        panels_per_period=_panels_per_period(float(np.sqrt(norm2(x)))),
        acceleration=acceleration,
    )


def fundamental_solution(a: float, x, y, tol: Optional[float] = None,
                         budget: Optional[QuadratureBudget] = None,
                         kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG):
    """Gamma_a(x, y) (matrice 2x2) et son estimation d'erreur."""
    budget = _resolve_budget(budget, tol)
    values, errors = fundamental_solution_batch(a, x, y, budget, kernel_config)
    return values[0], float(errors[0])


def grad_fundamental_solution_batch(a: float, x, ys, budget: Optional[QuadratureBudget] = None,
                                    kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG):
    """grad_y Gamma_a(x, y), forme (m, k, i, j) = d Gamma_ij / d y_k.

    d/dy_k de K(O(at)x - y, t) = -(d_k K)(z, t); l'intégrande décroît en
    1/t^2, la queue ne porte donc pas de partie lente.
    """
    budget = budget or default_budget()
    x, ys = _check_arguments(a, x, ys)

    def integrand(t):
        z = _moving_argument(a, x, ys, t)
        return -grad_kernel_K(z, t[:, None], kernel_config)

    separation = float(np.sqrt(norm2(ys - x).max()))
    values, errors = integrate_time_oscillatory(
        integrand, a, head_cutoff(a, separation), budget,
        panels_per_period=_panels_per_period(float(np.sqrt(norm2(x)))),
    )
    return values, errors.max(axis=-1)


def grad_fundamental_solution(a: float, x, y, tol: Optional[float] = None,
                              budget: Optional[QuadratureBudget] = None,
                              kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG):
    """grad_y Gamma_a(x, y) (tableau (k, i, j)) et son estimation d'erreur."""
    budget = _resolve_budget(budget, tol)
    values, errors = grad_fundamental_solution_batch(a, x, y, budget, kernel_config)
    return values[0], float(errors[0])


def grad_fundamental_solution_fd(a: float, x, y, budget: Optional[QuadratureBudget] = None,
                                 kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG):
    """Différences finies centrées de Gamma_a en y (contrôle du gradient analytique)."""
    h = kernel_config.gradient_fd_step
    y = as_vec(y)
    stencil = np.array([y + h * e for e in IDENTITY] + [y - h * e for e in IDENTITY])
    values, errors = fundamental_solution_batch(a, x, stencil, budget, kernel_config)
    grad = (values[:2] - values[2:]) / (2.0 * h)
    return grad, float(errors.max() / h)


def gradient_time_integral(a: float, x, budget: Optional[QuadratureBudget] = None,
                           kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """int_0^inf |grad K(O(at)x, t)| dt (norme de Frobenius), de l'ordre de C/|x|.

    La norme est invariante par rotation: l'intégrale ne dépend pas de a.
    """
    if a == 0:
        raise DomainError("a = 0 non admis")
    budget = budget or default_budget()
    x = as_vec(x)
    if norm2(x) == 0.0:
        raise DomainError("x = 0: intégrale non bornée")

    def integrand(t):
        z = np.einsum('ij,j->i', rotation(a * t), x)
        return float(np.sqrt(np.sum(grad_kernel_K(z, t, kernel_config) ** 2)))

    value, _ = integrate_1d(integrand, (0.0, np.inf), budget)
    return float(value)


def b_time_integral(z, budget: Optional[QuadratureBudget] = None,
                    kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """int_0^inf |B(z, t)| dt (norme de Frobenius); vaut sqrt(2)/(8 pi) pour tout z != 0."""
    budget = budget or default_budget()
    z = as_vec(z)
    if norm2(z) == 0.0:
        raise DomainError("z = 0: B est identiquement nul")
    scale = float(norm2(z)) / 4.0

    def integrand(t):
        return float(np.sqrt(np.sum(kernel_B(z, t, kernel_config) ** 2)))

    # découpage autour de l'échelle |z|^2/4t = 1
    head, _ = integrate_1d(integrand, (0.0, scale), budget)
    tail, _ = integrate_1d(integrand, (scale, np.inf), budget)
    return float(head + tail)



def far_field_bound_shape(a: float, x, y, order: int = 0) -> np.ndarray:
    """Forme de la borne de |grad_y^m (Gamma_a - L)(x, y)| pour |x| > 2|y|:

        d_0m min{1/(|a||x|^2), 1/(|a|^(1/2)|x|)} + |x|^(1-m) min{1/(|a||x|^3), 1/|x|}
        + |y|^(2-m)/|x|^2

    Vectorisée en y. Pour |y| > 2|x| (estimation miroir), échanger x et y.
    """
    if order not in (0, 1):
        raise DomainError(f"Ordre de dérivée {order} non couvert (0 ou 1)")
    x = as_vec(x)
    rx = float(np.sqrt(norm2(x)))
    ry = np.sqrt(norm2(as_vec(y)))
    aa = abs(a)
    first = min(1.0 / (aa * rx ** 2), 1.0 / (np.sqrt(aa) * rx)) if order == 0 else 0.0
    second = rx ** (1 - order) * min(1.0 / (aa * rx ** 3), 1.0 / rx)
    return first + second + ry ** (2 - order) / rx ** 2
