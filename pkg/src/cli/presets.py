"""
Forces prédéfinies de la CLI.

- rot_bump: f = s psi(|y|) y^perp, support |y| <= 1
- radial_bump: f = s psi(|y|) y (moment angulaire nul)
- critical_tangential: f = s y^perp (1+|y|^2)^-2, exactement O(|y|^-3), moment non intégrable
- divform_gauss: F = s e^{-|y|^2/2} (S + k J), S symétrique fixe, J antisymétrique
- vortex_forcing: f = -s Delta U, solution exacte u = s U
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from src.errors import ConfigError
from src.kernel.geometry import perp
from src.quadrature.budget import DecayClass
from src.solver.forces import DIVERGENCE_FORM, POINTWISE, ForceSpec, envelope_bound, smooth_cutoff
from src.solver.nonlinear import VORTEX_FORCING_DECAY, vortex_forcing

logger = logging.getLogger(__name__)

# Exposant déclaré pour les forces à support (numériquement) compact
COMPACT_EXPONENT = 4.0
# Au-delà, e^{-|y|^2/2} < 2e-22
GAUSS_SUPPORT = 10.0
VORTEX_SUPPORT = 30.0

SYMMETRIC_PART = np.array([[1.0, 0.5], [0.5, -1.0]])
ANTISYMMETRIC_PART = np.array([[0.0, 1.0], [-1.0, 0.0]])


def rot_bump(strength: float = 1.0) -> ForceSpec:
    def field(p):
        return strength * smooth_cutoff(np.linalg.norm(p, axis=-1))[:, None] * perp(p)

    bound = envelope_bound(lambda rho: abs(strength) * smooth_cutoff(rho) * rho, COMPACT_EXPONENT)
    return ForceSpec(POINTWISE, field, DecayClass(COMPACT_EXPONENT, bound, support_radius=1.0),
                     name='rot_bump', parameters={'strength': strength})


def radial_bump(strength: float = 1.0) -> ForceSpec:
    def field(p):
        return strength * smooth_cutoff(np.linalg.norm(p, axis=-1))[:, None] * p

    bound = envelope_bound(lambda rho: abs(strength) * smooth_cutoff(rho) * rho, COMPACT_EXPONENT)
    return ForceSpec(POINTWISE, field, DecayClass(COMPACT_EXPONENT, bound, support_radius=1.0),
                     name='radial_bump', parameters={'strength': strength})


def critical_tangential(strength: float = 1.0) -> ForceSpec:
    def field(p):
        return strength * perp(p) / (1.0 + np.sum(p ** 2, axis=-1))[:, None] ** 2

    bound = envelope_bound(lambda rho: abs(strength) * rho / (1.0 + rho ** 2) ** 2, 3.0, support=1e3,
                           samples=200001)
    return ForceSpec(POINTWISE, field, DecayClass(3.0, bound), angular_moment_integrable=False,
                     name='critical_tangential', parameters={'strength': strength})


def divform_gauss(strength: float = 1.0, antisymmetric: float = 0.0) -> ForceSpec:
    """F12 - F21 = 2 k s e^{-|y|^2/2}: coefficient dominant 4 pi k s."""
    matrix = SYMMETRIC_PART + antisymmetric * ANTISYMMETRIC_PART

    def gaussian(p):
        return np.exp(-0.5 * np.sum(p ** 2, axis=-1))

    def field(p):
        return strength * gaussian(p)[:, None, None] * matrix

    def divergence(p):
        # d_k (g M_jk) = M_jk d_k g = -g (M y)_j
        return -strength * gaussian(p)[:, None] * np.einsum('jk,nk->nj', matrix, p)

    scale = abs(strength) * float(np.linalg.norm(matrix))
    bound = envelope_bound(lambda rho: scale * np.exp(-0.5 * rho ** 2), COMPACT_EXPONENT, GAUSS_SUPPORT)
    return ForceSpec(DIVERGENCE_FORM, field, DecayClass(COMPACT_EXPONENT, bound, support_radius=GAUSS_SUPPORT),
                     name='divform_gauss', divergence=divergence,
                     parameters={'strength': strength, 'antisymmetric': antisymmetric})


def vortex_preset(strength: float = 1.0) -> ForceSpec:
    def field(p):
        return strength * vortex_forcing(p)

    decay = DecayClass(VORTEX_FORCING_DECAY.exponent, abs(strength) * VORTEX_FORCING_DECAY.bound + 1e-300,
                       support_radius=VORTEX_SUPPORT)
    return ForceSpec(POINTWISE, field, decay, name='vortex_forcing', parameters={'strength': strength})


@dataclass(frozen=True)
class ForcePreset:
    """Force nommée et ses paramètres admis."""
    name: str
    builder: Callable[..., ForceSpec]
    kind: str
    parameters: Tuple[str, ...]
    description: str


PRESETS: Dict[str, ForcePreset] = {
    p.name: p for p in (
        ForcePreset('rot_bump', rot_bump, POINTWISE, ('strength',),
                    "bosse rotationnelle compacte s psi(|y|) y^perp"),
        ForcePreset('radial_bump', radial_bump, POINTWISE, ('strength',),
                    "bosse radiale compacte s psi(|y|) y (alpha = 0)"),
        ForcePreset('critical_tangential', critical_tangential, POINTWISE, ('strength',),
                    "force tangentielle en O(|y|^-3), cas critique r = 0"),
        ForcePreset('divform_gauss', divform_gauss, DIVERGENCE_FORM, ('strength', 'antisymmetric'),
                    "tenseur gaussien en forme divergence"),
        ForcePreset('vortex_forcing', vortex_preset, POINTWISE, ('strength',),
                    "-s Delta U, solution exacte s U"),
    )
}


def build_force(name: str, **params) -> ForceSpec:
    """Construit la force nommée; ConfigError pour un nom ou un paramètre inconnu."""
    preset = PRESETS.get(name)
    if preset is None:
        raise ConfigError(f"Force inconnue '{name}' (disponibles: {', '.join(sorted(PRESETS))})",
                          field='force.preset')
    unknown = set(params) - set(preset.parameters)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"Paramètre '{key}' non admis pour la force '{name}'", field=f"force.{key}")
    logger.debug(f"Force {name} {params}")
    return preset.builder(**params)
