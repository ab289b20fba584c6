"""
Budgets de quadrature et classes de décroissance.
"""
import logging
from dataclasses import dataclass, asdict, replace

import numpy as np

from src import config
from src.errors import DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureBudget:
    """Tolérances et plafonds d'effort d'une intégration."""
    abs_tol: float = 1e-8
    rel_tol: float = 1e-6
    max_evals: int = 2_000_000
    max_periods: int = 4096          # périodes de rotation pour la queue oscillante
    truncation_radius_cap: float = 128.0

    def __post_init__(self):
        if min(self.abs_tol, self.rel_tol, self.truncation_radius_cap) <= 0:
            raise DomainError("Budget invalide: tolérances et rayon de troncature doivent être > 0")
        if self.max_evals < 100:
            raise DomainError(f"Budget invalide: max_evals={self.max_evals} < 100")
        if self.max_periods <= 0:
            raise DomainError("Budget invalide: max_periods doit être > 0")

    def tolerance(self, value) -> float:
        """Tolérance effective max(abs_tol, rel_tol*|value|)."""
        return max(self.abs_tol, self.rel_tol * float(np.max(np.abs(value), initial=0.0)))

    def scaled(self, factor: float) -> "QuadratureBudget":
        """Budget dont l'effort (évaluations, périodes, troncature) est multiplié par factor."""
        if factor <= 0:
            raise DomainError(f"Facteur de budget invalide: {factor}")
        return replace(
            self,
            max_evals=max(100, int(self.max_evals * factor)),
            max_periods=max(1, int(self.max_periods * factor)),
            truncation_radius_cap=self.truncation_radius_cap * factor,
        )

    def tightened(self, factor: float) -> "QuadratureBudget":
        """Budget aux tolérances divisées par factor (valeurs de référence)."""
        return replace(self, abs_tol=self.abs_tol / factor, rel_tol=self.rel_tol / factor,
                       max_evals=int(self.max_evals * factor))

    def to_dict(self) -> dict:
        return asdict(self)


def default_budget() -> QuadratureBudget:
    """Budget par défaut lu dans src.config, mis à l'échelle par ROTFLOW_BUDGET_SCALE."""
    budget = QuadratureBudget(
        abs_tol=config.ABS_TOL,
        rel_tol=config.REL_TOL,
        max_evals=config.MAX_EVALS,
        max_periods=config.MAX_PERIODS,
        truncation_radius_cap=config.TRUNCATION_CAP,
    )
    if config.BUDGET_SCALE != 1.0:
        logger.debug(f"Budget mis à l'échelle par {config.BUDGET_SCALE}")
        budget = budget.scaled(config.BUDGET_SCALE)
    return budget


@dataclass(frozen=True)
class DecayClass:
    """Classe L^inf_s: |champ(x)| <= bound / (1+|x|)^exponent."""
    exponent: float
    bound: float
    support_radius: float = None     # support compact connu (None = plan entier)

    def __post_init__(self):
        if self.exponent < 0:
            raise DomainError(f"Exposant de décroissance négatif: {self.exponent}")
        if self.bound <= 0:
            raise DomainError(f"Borne de décroissance non positive: {self.bound}")

    def envelope(self, radius):
        """Enveloppe M/(1+rho)^s."""
        return self.bound / (1.0 + np.asarray(radius, dtype=float)) ** self.exponent

    def tail_bound(self, radius: float) -> float:
        """Borne 2*pi*M * int_R^inf rho (1+rho)^-s drho (forme fermée, s > 2)."""
        s = self.exponent
        if s <= 2:
            raise DomainError(f"Queue non intégrable pour l'exposant {s} <= 2")
        if self.support_radius is not None and radius >= self.support_radius:
            return 0.0
        q = 1.0 + radius
        return 2.0 * np.pi * self.bound * (q ** (2 - s) / (s - 2) - q ** (1 - s) / (s - 1))

    def truncation_radius(self, target: float, cap: float):
        """Plus petit rayon dont la queue est < target, plafonné à cap.

        Retourne (rayon, borne de queue au rayon retenu).
        """
        if self.support_radius is not None:
            radius = min(self.support_radius, cap)
            return radius, self.tail_bound(radius)
        lo, hi = 0.0, 1.0
        while self.tail_bound(hi) >= target and hi < cap:
            lo, hi = hi, min(2.0 * hi, cap)
        if self.tail_bound(hi) >= target:
            bound = self.tail_bound(cap)
            logger.warning(f"Troncature plafonnée à R={cap:g} (borne de queue {bound:.3e} > {target:.3e})")
            return cap, bound
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.tail_bound(mid) < target:
                hi = mid
            else:
                lo = mid
        return hi, self.tail_bound(hi)

    def check(self, points, values, slack: float = 1.0 + 1e-9) -> None:
        """Vérifie ponctuellement |valeur| <= enveloppe sur des échantillons."""
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        radii = np.linalg.norm(points, axis=-1)
        norms = np.sqrt(np.sum(values.reshape(len(radii), -1) ** 2, axis=-1))
        excess = norms - slack * self.envelope(radii)
        if np.any(excess > 0):
            i = int(np.argmax(excess))
            raise DomainError(
                f"Décroissance déclarée violée en {points[i].tolist()}: "
                f"|f|={norms[i]:.3e} > {self.bound:g}/(1+|x|)^{self.exponent:g}"
            )
