"""
Vecteurs et matrices du plan: perpendiculaire, produit tensoriel, rotation.

Les vecteurs sont des tableaux numpy de dernière dimension 2, les matrices
de dernières dimensions (2, 2); toutes les fonctions sont vectorisées.
"""
import numpy as np

from src.errors import DomainError

IDENTITY = np.eye(2)
IDENTITY.setflags(write=False)


def as_vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1:] != (2,):
        raise DomainError(f"Vecteur du plan attendu, forme {v.shape}")
    return v


def perp(v) -> np.ndarray:
    """v^perp = (-v2, v1)."""
    v = as_vec(v)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def outer(u, v) -> np.ndarray:
    """(u x v)_ij = u_i v_j."""
    return as_vec(u)[..., :, None] * as_vec(v)[..., None, :]


def norm2(v) -> np.ndarray:
    """|v|^2."""
    v = as_vec(v)
    return v[..., 0] ** 2 + v[..., 1] ** 2


def rotation(theta) -> np.ndarray:
    """O(theta) = ((cos, -sin), (sin, cos))."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("Angle de rotation non fini")
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)


def rotate(theta, v) -> np.ndarray:
    """O(theta) v."""
    return np.einsum('...ij,...j->...i', rotation(theta), as_vec(v))


def polar_directions(n_angles: int, offset: float = 0.0):
    """Angles uniformes et vecteurs unitaires e(theta), forme (n, 2)."""
    theta = offset + 2.0 * np.pi * np.arange(n_angles) / n_angles
    return theta, np.stack([np.cos(theta), np.sin(theta)], axis=-1)
