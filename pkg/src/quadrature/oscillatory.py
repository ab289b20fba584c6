"""
Intégrales en temps moyennées par la rotation: int_0^inf O(at)^T M(t) dt.

Schéma: tête [0, l] par quadrature adaptative, queue découpée en périodes de
rotation 2*pi/|a| (Gauss-Legendre composite par période), sommes partielles
relevées à des points de contrôle alignés en phase puis extrapolées en 1/T
(Richardson) ou par Aitken itéré.
"""
import logging
from typing import Callable, Optional

import numpy as np
from scipy.special import sici

from src.errors import ConvergenceFailure, DomainError
from src.quadrature.budget import QuadratureBudget
from src.quadrature.line import gauss_legendre, integrate_1d

logger = logging.getLogger(__name__)

# Nombre de noeuds (temps x lot) évalués par appel vectorisé
_CHUNK_SIZE = 2_000_000


def rotation_transpose(a: float, t) -> np.ndarray:
    """O(at)^T pour un tableau de temps, forme (n, 2, 2)."""
    c, s = np.cos(a * np.asarray(t)), np.sin(a * np.asarray(t))
    return np.stack([np.stack([c, s], axis=-1), np.stack([-s, c], axis=-1)], axis=-2)


def _apply_rotation(a: float, t, values) -> np.ndarray:
    """Contracte O(at)^T avec l'avant-dernier axe de values (forme (n, ..., 2, q))."""
    rot = rotation_transpose(a, t)
    extra = values.ndim - 3
    rot = rot.reshape((rot.shape[0],) + (1,) * extra + (2, 2))
    return np.einsum('...im,...mj->...ij', rot, values)


def inverse_time_tail(a: float, T: float) -> np.ndarray:
    """int_T^inf O(at)^T dt / t en forme fermée (sinus et cosinus intégraux)."""
    si, ci = sici(abs(a) * T)
    c = -ci
    s = np.sign(a) * (np.pi / 2 - si)
    return np.array([[c, s], [-s, c]])


def richardson_extrapolate(h, values) -> np.ndarray:
    """Extrapolation polynomiale (Neville) en h -> 0.

    h: pas (ici 1/T), values: tableau (m, ...) des sommes partielles.
    """
    h = np.asarray(h, dtype=float)
    table = [np.array(v, dtype=float) for v in values]
    m = len(table)
    for level in range(1, m):
        for i in range(m - level):
            j = i + level
            table[i] = (h[i] * table[i + 1] - h[j] * table[i]) / (h[i] - h[j])
    return table[0]


def aitken_extrapolate(values) -> np.ndarray:
    """Aitken Delta^2 itéré, repli sur la dernière somme si non monotone."""
    seq = [np.array(v, dtype=float) for v in values]
    fallback = seq[-1]
    while len(seq) >= 3:
        nxt = []
        for s0, s1, s2 in zip(seq, seq[1:], seq[2:]):
            d1, d2 = s1 - s0, s2 - s1
            denom = d2 - d1
            safe = np.abs(denom) > 1e-300
            with np.errstate(divide='ignore', invalid='ignore'):
                acc = np.where(safe, s2 - d2 * d2 / np.where(safe, denom, 1.0), s2)
            nxt.append(acc)
        if len(nxt) >= 2:
            prev_step = np.abs(seq[-1] - seq[-2])
            new_step = np.abs(nxt[-1] - nxt[-2])
            if np.any(new_step > prev_step + 1e-300):
                return fallback
        seq = nxt
    return seq[-1]


def checkpoint_schedule(max_periods: int, start: int = 4):
    """Nombres de périodes aux points de contrôle: croissance géométrique en sqrt(2)."""
    counts = []
    j = 0
    while True:
        n = int(round(start * 2 ** (j / 2)))
        if n > max_periods:
            break
        if not counts or n > counts[-1]:
            counts.append(n)
        j += 1
    return counts


def integrate_time_oscillatory(M: Callable, a: float, l: float, budget: QuadratureBudget,
                               tail_coefficient: Optional[np.ndarray] = None,
                               panels_per_period: Callable = None,
                               gauss_order: int = 8,
                               acceleration: str = 'richardson',
                               extrapolation_points: int = 6):
    """Calcule int_0^inf O(at)^T M(t) dt.

    Args:
        M: M(t) pour t de forme (n,), retourne (n, ..., 2, q). O(at)^T est
            contracté avec l'avant-dernier axe.
        a: vitesse angulaire non nulle.
        l: point de coupure tête/queue.
        budget: tolérances et plafonds (max_periods borne la queue).
        tail_coefficient: C tel que M(t) = C/t + O(1/t^2); la partie C/t de la
            queue est intégrée exactement.
        panels_per_period: nombre de sous-panneaux Gauss-Legendre par période
            en fonction du temps de début de période (défaut: 2).
        acceleration: 'richardson' (en 1/T) ou 'aitken'.

    Returns:
        (valeur (..., 2, q), erreur estimée (...))
    """
    if a == 0:
        raise DomainError("a = 0: l'intégrale en temps diverge logarithmiquement (paradoxe de Stokes)")
    if l <= 0:
        raise DomainError(f"Point de coupure l={l} doit être > 0")
    if acceleration not in ('richardson', 'aitken'):
        raise DomainError(f"Accélération inconnue: {acceleration}")

    period = 2.0 * np.pi / abs(a)
    probe = M(np.array([l]))
    item_shape = probe.shape[1:]

    def head_integrand(t):
        return _apply_rotation(a, np.array([t]), M(np.array([t])))[0].ravel()

    head, head_err = integrate_1d(head_integrand, (0.0, l), budget)
    head = np.asarray(head).reshape(item_shape)

    if tail_coefficient is not None:
        coeff = np.broadcast_to(np.asarray(tail_coefficient, dtype=float), item_shape)
        exact_tail = np.einsum('im,...mj->...ij', inverse_time_tail(a, l), coeff)
    else:
        coeff = None
        exact_tail = np.zeros(item_shape)

    nodes, weights = gauss_legendre(gauss_order)
    per_item = int(np.prod(item_shape[:-2])) if len(item_shape) > 2 else 1

    def period_block(k0: int, k1: int) -> np.ndarray:
        """Somme des intégrales sur les périodes k0..k1-1."""
        total = np.zeros(item_shape)
        k = k0
        while k < k1:
            start = l + k * period
            n_sub = 2 if panels_per_period is None else max(1, int(panels_per_period(start)))
            nodes_per_period = n_sub * gauss_order
            step = max(1, min(k1 - k, _CHUNK_SIZE // max(1, nodes_per_period * per_item)))
            sub_edges = start + period * np.arange(step * n_sub + 1) / n_sub
            lo, hi = sub_edges[:-1, None], sub_edges[1:, None]
            half = 0.5 * (hi - lo)
            t = ((lo + hi) * 0.5 + half * nodes[None, :]).ravel()
            w = (half * weights[None, :]).ravel()
            values = M(t)
            if coeff is not None:
                values = values - coeff[None] / t.reshape((-1,) + (1,) * len(item_shape))
            values = _apply_rotation(a, t, values)
            total += np.tensordot(w, values, axes=(0, 0))
            k += step
        return total

    schedule = checkpoint_schedule(budget.max_periods)
    if not schedule:
        raise DomainError(f"max_periods={budget.max_periods} trop petit pour la queue oscillante")

    partial = head + exact_tail
    done = 0
    sums, steps, estimates = [], [], []
    error = None
    for count in schedule:
        partial = partial + period_block(done, count)
        done = count
        sums.append(partial.copy())
        steps.append(1.0 / (l + count * period))
        if len(sums) < 3:
            continue
        if acceleration == 'richardson':
            m = min(extrapolation_points, len(sums))
            estimates.append(richardson_extrapolate(steps[-m:], sums[-m:]))
        else:
            estimates.append(aitken_extrapolate(sums[-extrapolation_points:]))
        if len(estimates) < 2:
            continue
        diff = np.abs(estimates[-1] - estimates[-2])
        scale = np.abs(estimates[-1])
        item_axes = (-2, -1)
        diff_item = diff.max(axis=item_axes)
        tol_item = np.maximum(budget.abs_tol, budget.rel_tol * scale.max(axis=item_axes))
        error = diff_item + head_err
        if np.all(diff_item < 0.5 * tol_item):
            logger.debug(f"Queue oscillante convergée après {count} périodes (a={a:g}, l={l:.3g})")
            return estimates[-1], error

    best = estimates[-1] if estimates else partial
    raise ConvergenceFailure(
        f"Queue oscillante non convergée après {done} périodes (a={a:g})",
        value=best, error=error,
    )
