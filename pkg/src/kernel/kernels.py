"""
Noyaux en forme fermée: Gauss G, H, K = G*I + H, B, noyau dominant L et
gradients.

Toutes les formules s'écrivent avec rho = |z|^2/(4t) et les deux facteurs
    E(rho)  = (1 - e^-rho)/rho
    D1(rho) = (E - e^-rho)/rho
évalués par expm1 et, pour rho petit, par leurs séries de Taylor:
    H = z(x)z D1/(16 pi t^2) - I E/(8 pi t)
    B = -rho D1/(8 pi t) I + z(x)z D1/(16 pi t^2)
Les fonctions sont vectorisées: z de forme (..., 2), t diffusable sur (...).
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from src import config
from src.errors import DomainError
from src.kernel.geometry import IDENTITY, as_vec, norm2, outer, perp

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
EIGHT_PI = 8.0 * np.pi

# Dérivée de y^perp par rapport à y_k: J[k, j] = d(y^perp)_j / dy_k
PERP_JACOBIAN = np.array([[0.0, 1.0], [-1.0, 0.0]])
PERP_JACOBIAN.setflags(write=False)

# Seuil en rho sous lequel D1' est évalué par série
_D1_PRIME_SERIES_RADIUS = 0.1


@dataclass(frozen=True)
class KernelEvalConfig:
    """Seuils numériques des noyaux."""
    series_switch_radius: float = field(default_factory=lambda: config.SERIES_SWITCH_RADIUS)
    gradient_fd_step: float = field(default_factory=lambda: config.GRADIENT_FD_STEP)

    def __post_init__(self):
        if not 0.0 < self.series_switch_radius < 1.0:
            raise DomainError(f"series_switch_radius={self.series_switch_radius} hors de (0, 1)")
        if self.gradient_fd_step <= 0:
            raise DomainError(f"gradient_fd_step={self.gradient_fd_step} doit être > 0")


DEFAULT_KERNEL_CONFIG = KernelEvalConfig()


# =============================================================================
# Facteurs scalaires
# =============================================================================

def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("Temps t <= 0: les noyaux ne sont définis que pour t > 0")
    return t


def e_factor(rho, switch: float = None) -> np.ndarray:
    """E(rho) = (1 - e^-rho)/rho, série 1 - rho/2 + rho^2/6 - rho^3/24 près de 0."""
    switch = DEFAULT_KERNEL_CONFIG.series_switch_radius if switch is None else switch
    rho = np.asarray(rho, dtype=float)
    small = rho < switch
    safe = np.where(small, 1.0, rho)
    closed = -np.expm1(-safe) / safe
    series = 1.0 - rho / 2.0 + rho ** 2 / 6.0 - rho ** 3 / 24.0
    return np.where(small, series, closed)


def d1_factor(rho, switch: float = None) -> np.ndarray:
    """D1(rho) = (E - e^-rho)/rho = -E'(rho), série 1/2 - rho/3 + rho^2/8 - rho^3/30."""
    switch = DEFAULT_KERNEL_CONFIG.series_switch_radius if switch is None else switch
    rho = np.asarray(rho, dtype=float)
    small = rho < switch
    safe = np.where(small, 1.0, rho)
    closed = (e_factor(safe, switch) - np.exp(-safe)) / safe
    series = 0.5 - rho / 3.0 + rho ** 2 / 8.0 - rho ** 3 / 30.0
    return np.where(small, series, closed)


def d1_prime(rho, switch: float = None) -> np.ndarray:
    """D1'(rho) = (e^-rho - 2 D1)/rho.

    Série: sum_{n>=2} (-1)^(n+1) n (n-1) rho^(n-2) / (n+1)!, utilisée pour rho < 0.1.
    """
    rho = np.asarray(rho, dtype=float)
    small = rho < _D1_PRIME_SERIES_RADIUS
    safe = np.where(small, 1.0, rho)
    closed = (np.exp(-safe) - 2.0 * d1_factor(safe, switch)) / safe
    series = np.zeros_like(rho)
    factorial = 2.0
    for n in range(2, 12):
        factorial *= n + 1
        series = series + (-1) ** (n + 1) * n * (n - 1) * rho ** (n - 2) / factorial
    return np.where(small, series, closed)


def _rho(z, t):
    return norm2(z) / (4.0 * t)


def _zz(z):
    return outer(z, z)


# =============================================================================
# Noyaux
# =============================================================================

def gauss(x, t) -> np.ndarray:
    """G(x, t) = exp(-|x|^2/4t)/(4 pi t)."""
    t = _check_time(t)
    x = as_vec(x)
    return np.exp(-_rho(x, t)) / (FOUR_PI * t)


def kernel_H(x, t, kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """H(x, t) = int_t^inf grad^2 G(x, s) ds, limite -I/(8 pi t) en x = 0."""
    t = _check_time(t)
    x = as_vec(x)
    rho = _rho(x, t)
    switch = kernel_config.series_switch_radius
    e, d1 = e_factor(rho, switch), d1_factor(rho, switch)
    t2 = np.asarray(t)[..., None, None]
    return (_zz(x) * d1[..., None, None] / (16.0 * np.pi * t2 ** 2)
            - IDENTITY * (e[..., None, None] / (EIGHT_PI * t2)))


def kernel_K(x, t, kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """K(x, t) = G(x, t) I + H(x, t)."""
    return gauss(x, t)[..., None, None] * IDENTITY + kernel_H(x, t, kernel_config)


def b_prefactor(x, t, kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """Facteur scalaire de B: e^-rho/(8 pi t) - (1 - e^-rho)/(2 pi |x|^2) = -rho D1/(8 pi t)."""
    t = _check_time(t)
    x = as_vec(x)
    rho = _rho(x, t)
    return -rho * d1_factor(rho, kernel_config.series_switch_radius) / (EIGHT_PI * t)


def kernel_B(x, t, kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """B(x, t) = prefacteur * (I - 2 x^ (x) x^), nul en x = 0.

    Écrit sans division par |x|: B = p I + z(x)z D1/(16 pi t^2).
    """
    t = _check_time(t)
    x = as_vec(x)
    rho = _rho(x, t)
    d1 = d1_factor(rho, kernel_config.series_switch_radius)
    t2 = np.asarray(t)[..., None, None]
    prefactor = (-rho * d1)[..., None, None] / (EIGHT_PI * t2)
    return prefactor * IDENTITY + _zz(x) * d1[..., None, None] / (16.0 * np.pi * t2 ** 2)


def grad_kernel_K(x, t, kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> np.ndarray:
    """Gradient de K en espace, forme (..., k, i, j) = d K_ij / d x_k."""
    t = _check_time(t)
    x = as_vec(x)
    rho = _rho(x, t)
    switch = kernel_config.series_switch_radius
    d1 = d1_factor(rho, switch)
    dd1 = d1_prime(rho, switch)
    tt = np.asarray(t)[..., None, None, None]
    xk = x[..., :, None, None]
    # partie diagonale: d_k [G - E/(8 pi t)] = (x_k/2t)(-e^-rho/(4 pi t) + D1/(8 pi t))
    scalar = (-np.exp(-rho) / (FOUR_PI * np.asarray(t)) + d1 / (EIGHT_PI * np.asarray(t)))
    diagonal = (xk / (2.0 * tt)) * scalar[..., None, None, None] * IDENTITY
    # partie z(x)z D1/(16 pi t^2)
    eye = IDENTITY
    delta_ik_zj = eye[:, :, None] * x[..., None, None, :]
    delta_jk_zi = eye[:, None, :] * x[..., None, :, None]
    zzz = x[..., :, None, None] * x[..., None, :, None] * x[..., None, None, :]
    tensor = ((delta_ik_zj + delta_jk_zi) * d1[..., None, None, None]
              + zzz * dd1[..., None, None, None] / (2.0 * tt)) / (16.0 * np.pi * tt ** 2)
    return diagonal + tensor


# =============================================================================
# Noyau dominant
# =============================================================================

def _check_far_point(x) -> np.ndarray:
    x = as_vec(x)
    if np.any(norm2(x) == 0.0):
        raise DomainError("Noyau dominant L(x, y) non défini en x = 0")
    return x


def leading_kernel(x, y) -> np.ndarray:
    """L(x, y) = x^perp (x) y^perp / (4 pi |x|^2)."""
    x = _check_far_point(x)
    y = as_vec(y)
    return outer(perp(x), perp(y)) / (FOUR_PI * norm2(x)[..., None, None])


def grad_leading_kernel(x, y=None) -> np.ndarray:
    """d L_ij / d y_k, forme (..., k, i, j); indépendant de y."""
    x = _check_far_point(x)
    xp = perp(x) / (FOUR_PI * norm2(x)[..., None])
    return xp[..., None, :, None] * PERP_JACOBIAN[:, None, :]


def mirrored_leading_kernel(x, y) -> np.ndarray:
    """Profil dominant pour |y| > 2|x|: x^perp (x) y^perp / (4 pi |y|^2) = L(y, x)^T."""
    return np.swapaxes(leading_kernel(y, x), -1, -2)
