"""
Audits quantitatifs des estimations de décroissance.

Chaque estimation "|observé| <= C * forme" est auditée à une constante près:
on calcule les rapports observé/forme sur un échantillon, la constante est
le rapport maximal, et l'audit passe si les rapports tiennent dans moins
d'une décade et ne montrent pas de tendance croissante (tau de Kendall).
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import kendalltau

from src.errors import ConvergenceFailure, DomainError
from src.kernel.fundamental import (
    far_field_bound_shape, fundamental_solution_batch, grad_fundamental_solution_batch,
)
from src.kernel.geometry import perp, polar_directions
from src.kernel.kernels import (
    DEFAULT_KERNEL_CONFIG, KernelEvalConfig, grad_leading_kernel, leading_kernel,
    mirrored_leading_kernel,
)
from src.quadrature.budget import QuadratureBudget, default_budget
from src.solver.forces import ForceSpec
from src.solver.linear import LinearSolution, truncated_moment
from src.solver.nonlinear import laplacian_moment
from src.solver.polar import PolarGrid

logger = logging.getLogger(__name__)

MIN_FIT_RADII = 4
MIN_FIT_DECADES = 1.5
MAX_SPREAD_DECADES = 1.0
VORTEX_MOMENT_TOLERANCE = 1e-4

THEOREM_BOUNDS = ('thm1.1', 'thm1.2', 'thm1.3')


# =============================================================================
# Normes et coefficient dominant
# =============================================================================

def _sample_points(sample_geometry) -> np.ndarray:
    if isinstance(sample_geometry, PolarGrid):
        return sample_geometry.points.reshape(-1, 2)
    points = np.atleast_2d(np.asarray(sample_geometry, dtype=float))
    if points.shape[-1] != 2:
        raise DomainError(f"Points du plan attendus, forme {points.shape}")
    return points.reshape(-1, 2)


def _magnitude(values, n: int) -> np.ndarray:
    return np.linalg.norm(np.asarray(values, dtype=float).reshape(n, -1), axis=-1)


def weighted_norm(field: Callable, s: float, sample_geometry) -> float:
    """max (1+|x|)^s |champ(x)| sur les échantillons, plus le sup du modèle de queue s'il existe.

    sample_geometry: points (n, 2) ou PolarGrid.
    """
    if s < 0:
        raise DomainError(f"Poids s={s} < 0")
    points = _sample_points(sample_geometry)
    weights = (1.0 + np.linalg.norm(points, axis=-1)) ** s
    value = float(np.max(weights * _magnitude(field(points), len(points)), initial=0.0))
    tail = getattr(field, 'tail_coefficients', None)
    if tail is not None:
        # queue c(theta)/rho^beta: (1+rho)^s/rho^beta décroît pour s <= beta
        beta = field.tail_exponent
        coeffs = np.linalg.norm(tail, axis=-1)
        if s > beta and np.any(coeffs > 0):
            return float('inf')
        rho = field.grid.rho[-1]
        value = max(value, float(np.max(coeffs)) * (1.0 + rho) ** s / rho ** beta)
    return value


def extract_rotational_coefficient(field: Callable, radius: float, n_angles: int = 64) -> float:
    """c = 4 pi rho <u . tau>, tau = x^perp/|x|, moyenne sur n_angles directions."""
    if radius <= 0:
        raise DomainError(f"Rayon {radius} <= 0")
    if n_angles < 16:
        raise DomainError(f"n_angles={n_angles} < 16")
    _, directions = polar_directions(n_angles)
    values = np.asarray(field(radius * directions), dtype=float)
    tangential = np.sum(values * perp(directions), axis=-1)
    return float(4.0 * np.pi * radius * np.mean(tangential))


# =============================================================================
# Exposants de décroissance
# =============================================================================

@dataclass
class DecayFit:
    """Ajustement log-log |champ| ~ rho^(-exposant), par rayon et sur le sup angulaire."""
    radii: List[float]
    angles: List[float]
    exponents: List[float]
    residuals: List[float]
    pooled_exponent: float
    pooled_residual: float

    @property
    def min_exponent(self) -> float:
        finite = [e for e in self.exponents if np.isfinite(e)]
        return min(finite) if finite else float('inf')

    def to_dict(self) -> dict:
        return asdict(self)


def _check_fit_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if len(radii) < MIN_FIT_RADII:
        raise DomainError(f"Ajustement de décroissance: {len(radii)} rayons < {MIN_FIT_RADII}")
    if np.any(radii <= 0):
        raise DomainError("Ajustement de décroissance: rayons non positifs")
    span = np.log10(radii.max() / radii.min())
    if span < MIN_FIT_DECADES - 1e-9:
        raise DomainError(f"Ajustement de décroissance: {span:.2f} décades < {MIN_FIT_DECADES}")
    return radii


def _loglog(radii: np.ndarray, magnitudes: np.ndarray) -> Tuple[float, float]:
    """Exposant et résidu rms (en log10) d'un ajustement; exposant infini pour un champ nul."""
    if not np.all(magnitudes > 0):
        return float('inf'), 0.0
    x, y = np.log10(radii), np.log10(magnitudes)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(-slope), residual


def fit_decay_samples(radii, magnitudes, angles=None) -> DecayFit:
    """Ajuste des magnitudes déjà échantillonnées, forme (rayons angulaires, rayons)."""
    radii = _check_fit_radii(radii)
    magnitudes = np.atleast_2d(np.asarray(magnitudes, dtype=float))
    if magnitudes.shape[-1] != len(radii):
        raise DomainError(f"Magnitudes de forme {magnitudes.shape} pour {len(radii)} rayons")
    angles = list(angles) if angles is not None else [float('nan')] * len(magnitudes)
    fits = [_loglog(radii, row) for row in magnitudes]
    pooled, pooled_residual = _loglog(radii, magnitudes.max(axis=0))
    return DecayFit(
        radii=radii.tolist(), angles=[float(t) for t in angles],
        exponents=[e for e, _ in fits], residuals=[res for _, res in fits],
        pooled_exponent=pooled, pooled_residual=pooled_residual,
    )


def fit_decay(field: Callable, radii, n_rays: int = 8, offset: float = 0.0) -> DecayFit:
    """Évalue |champ| sur n_rays rayons et ajuste l'exposant de décroissance."""
    radii = _check_fit_radii(radii)
    theta, directions = polar_directions(n_rays, offset)
    points = (directions[:, None, :] * radii[None, :, None]).reshape(-1, 2)
    magnitudes = _magnitude(field(points), len(points)).reshape(n_rays, len(radii))
    return fit_decay_samples(radii, magnitudes, theta)


def _probe_table(probes: np.ndarray, values: np.ndarray):
    """Range des valeurs aux sondes en table (angles, rayons); exige une géométrie complète."""
    radius = np.round(np.linalg.norm(probes, axis=-1), 10)
    angle = np.round(np.mod(np.arctan2(probes[:, 1], probes[:, 0]), 2 * np.pi), 10)
    radii, angles = np.unique(radius), np.unique(angle)
    table = np.full((len(angles), len(radii)), np.nan)
    table[np.searchsorted(angles, angle), np.searchsorted(radii, radius)] = values
    if np.any(np.isnan(table)):
        raise DomainError("Sondes hors d'une géométrie rayons x rayons complète")
    return radii, angles, table


def fit_solution_decay(solution: LinearSolution, quantity: str = 'remainder') -> DecayFit:
    """Exposant de décroissance du reste (ou de la pression) d'une solution linéaire."""
    if quantity == 'remainder':
        values = np.linalg.norm(solution.remainder, axis=-1)
    elif quantity == 'pressure':
        values = np.abs(solution.pressure)
    elif quantity == 'velocity':
        values = np.linalg.norm(solution.velocity, axis=-1)
    else:
        raise DomainError(f"Quantité inconnue: {quantity}")
    radii, angles, table = _probe_table(solution.probes, values)
    return fit_decay_samples(radii, table, angles)


# =============================================================================
# Audits de bornes
# =============================================================================

@dataclass
class BoundAudit:
    """Rapports observé/forme et constante ajustée d'une estimation."""
    name: str
    n_samples: int
    constant: float
    geometric_mean: float
    spread_decades: float
    kendall_tau: Optional[float]
    passed: bool
    excluded: int = 0
    parts: List["BoundAudit"] = field(default_factory=list)
    details: Dict = field(default_factory=dict)

    @property
    def max_ratio(self) -> float:
        return self.constant

    def to_dict(self) -> dict:
        return asdict(self)


def _trend(groups: Optional[Iterable[Tuple[Sequence[float], Sequence[float]]]]) -> Optional[float]:
    """Plus grand tau de Kendall (abscisse, rapport) sur les groupes; None si aucun n'est défini."""
    if not groups:
        return None
    taus = []
    for abscissa, ratios in groups:
        if len(ratios) < 3:
            continue
        tau, _ = kendalltau(abscissa, ratios)
        if np.isfinite(tau):
            taus.append(float(tau))
    return max(taus) if taus else None


def build_audit(name: str, ratios, trend_groups=None, excluded: int = 0,
                max_spread: float = MAX_SPREAD_DECADES, trend_tolerance: float = 0.0,
                details: Optional[dict] = None) -> BoundAudit:
    """Constante C = rapport maximal; verdict: étalement < max_spread décades et tau <= tolérance."""
    ratios = np.asarray(ratios, dtype=float)
    ratios = ratios[np.isfinite(ratios)]
    positive = ratios[ratios > 0]
    if len(positive) == 0:
        logger.info(f"Audit {name}: rapports tous nuls, vérifié trivialement")
        return BoundAudit(name, int(len(ratios)), 0.0, 0.0, 0.0, None, True, excluded,
                          details=details or {})
    constant = float(positive.max())
    spread = float(np.log10(constant / positive.min()))
    tau = _trend(trend_groups)
    passed = spread < max_spread and (tau is None or tau <= trend_tolerance)
    audit = BoundAudit(
        name=name, n_samples=int(len(ratios)), constant=constant,
        geometric_mean=float(np.exp(np.mean(np.log(positive)))),
        spread_decades=spread, kendall_tau=tau, passed=bool(passed), excluded=excluded,
        details=details or {},
    )
    verdict = "OK" if audit.passed else "ECHEC"
    logger.info(f"Audit {name}: C={constant:.3e}, étalement {spread:.2f} décades, tau={tau} -> {verdict}")
    return audit


def combine_audits(name: str, parts: List[BoundAudit]) -> BoundAudit:
    """Audit agrégé: passe si toutes les parties passent."""
    taus = [p.kendall_tau for p in parts if p.kendall_tau is not None]
    return BoundAudit(
        name=name,
        n_samples=sum(p.n_samples for p in parts),
        constant=max((p.constant for p in parts), default=0.0),
        geometric_mean=float(np.exp(np.mean([np.log(p.geometric_mean) for p in parts if p.geometric_mean > 0])))
        if any(p.geometric_mean > 0 for p in parts) else 0.0,
        spread_decades=max((p.spread_decades for p in parts), default=0.0),
        kendall_tau=max(taus) if taus else None,
        passed=all(p.passed for p in parts),
        excluded=sum(p.excluded for p in parts),
        parts=parts,
    )


def default_lemma21_samples(y=(0.3, 0.0), radii=(4.0, 8.0, 16.0, 32.0), angle: float = np.pi / 5):
    """Couples (x, y) à y fixé et |x| croissant sur une direction."""
    direction = np.array([np.cos(angle), np.sin(angle)])
    return [(r * direction, np.asarray(y, dtype=float)) for r in radii]


def _lemma21_sample(a: float, x, y, order: int, mirror: bool, budget, kernel_config) -> Tuple[float, float]:
    """(écart observé, forme) pour un couple |x| > 2|y|."""
    if mirror:
        # estimation miroir: Gamma_a(y, x) face à y^perp (x) x^perp/(4 pi |x|^2), |x| > 2|y|
        gamma, _ = fundamental_solution_batch(a, y, x[None, :], budget, kernel_config)
        observed = np.linalg.norm(gamma[0] - mirrored_leading_kernel(y, x))
    elif order == 0:
        gamma, _ = fundamental_solution_batch(a, x, y[None, :], budget, kernel_config)
        observed = np.linalg.norm(gamma[0] - leading_kernel(x, y))
    else:
        grad, _ = grad_fundamental_solution_batch(a, x, y[None, :], budget, kernel_config)
        observed = np.linalg.norm(grad[0] - grad_leading_kernel(x, y))
    shape = float(far_field_bound_shape(a, x, y, order))
    return float(observed), shape


def audit_lemma21(a_values: Sequence[float], xy_samples, budget: Optional[QuadratureBudget] = None,
                  orders: Sequence[int] = (0, 1), mirror: bool = True,
                  kernel_config: KernelEvalConfig = DEFAULT_KERNEL_CONFIG) -> BoundAudit:
    """Audit de |grad_y^m (Gamma_a - L)| <= C forme(a, x, y, m), m = 0, 1, et de l'estimation miroir.

    Les tendances sont mesurées en |x| à (a, y) fixés. Les échecs de
    quadrature sont exclus de l'ajustement et comptés.
    """
    budget = budget or default_budget()
    pairs = [(np.asarray(x, dtype=float), np.asarray(y, dtype=float)) for x, y in xy_samples]
    for x, y in pairs:
        if not np.linalg.norm(x) > 2.0 * np.linalg.norm(y):
            raise DomainError(f"Échantillon hors de |x| > 2|y|: x={x.tolist()}, y={y.tolist()}")

    variants = [(f"lemma21_m{m}", m, False) for m in orders]
    if mirror:
        variants.append(("lemma21_mirror", 0, True))

    parts = []
    for name, order, is_mirror in variants:
        ratios, groups, excluded = [], [], 0
        for a in a_values:
            by_y: Dict[tuple, List[Tuple[float, float]]] = {}
            for x, y in pairs:
                try:
                    observed, shape = _lemma21_sample(a, x, y, order, is_mirror, budget, kernel_config)
                except ConvergenceFailure as e:
                    logger.warning(f"{name}: échantillon exclu (a={a:g}, x={x.tolist()}): {e}")
                    excluded += 1
                    continue
                ratio = observed / shape
                ratios.append(ratio)
                by_y.setdefault(tuple(y.tolist()), []).append((float(np.linalg.norm(x)), ratio))
            for sequence in by_y.values():
                sequence.sort()
                groups.append(([s for s, _ in sequence], [q for _, q in sequence]))
        parts.append(build_audit(name, ratios, groups, excluded, details={'a_values': list(map(float, a_values))}))
    return combine_audits("lemma21", parts)


def theorem_shape(which: str, a: float, r: float, with_log: bool = True) -> float:
    """Facteur de forme en (a, r) des bornes du reste.

    thm1.1 et thm1.3: 1/(1-r) + |a|^(-(1+r)/2);
    thm1.2: 1/(1-r) + (1 + |log|a||)/|a|^(r/2), ou sans le facteur logarithmique.
    """
    if which not in THEOREM_BOUNDS:
        raise DomainError(f"Estimation inconnue: {which}")
    if a == 0 or not 0.0 <= r < 1.0:
        raise DomainError(f"Paramètres hors domaine: a={a}, r={r}")
    aa = abs(a)
    if which == 'thm1.2':
        log_factor = 1.0 + abs(np.log(aa)) if with_log else 1.0
        return 1.0 / (1.0 - r) + log_factor / aa ** (r / 2.0)
    return 1.0 / (1.0 - r) + aa ** (-(1.0 + r) / 2.0)


def _linear_ratios(solution: LinearSolution, which: str, with_log: bool = True):
    radius = np.linalg.norm(solution.probes, axis=-1)
    observed = np.linalg.norm(solution.remainder, axis=-1) * (1.0 + radius) ** (1.0 + solution.r)
    scale = theorem_shape(which, solution.a, solution.r, with_log) * solution.force_norm
    if scale == 0.0:
        return np.zeros_like(observed), radius
    return observed / scale, radius


def _radial_trend(ratios, radius):
    """Séquence (rayon, rapport maximal sur le cercle) pour le test de tendance."""
    keys = np.unique(np.round(radius, 10))
    rounded = np.round(radius, 10)
    return list(keys), [float(np.max(ratios[rounded == k])) for k in keys]


def audit_theorem_bounds(solutions, which: str, params: Optional[dict] = None) -> BoundAudit:
    """Audit des bornes du reste sur un balayage (a, r), constante unique par estimation.

    thm1.1, thm1.2: LinearSolution (ou liste); observé |R(x)|(1+|x|)^(1+r).
    thm1.3: couples (NonlinearSolution, PicardReport); observé ||v||_{L^inf_{1+r}},
    normalisé par lambda(f).
    """
    params = params or {}
    if which not in THEOREM_BOUNDS:
        raise DomainError(f"Estimation inconnue: {which}")
    if isinstance(solutions, LinearSolution):
        solutions = [solutions]
    elif which == 'thm1.3' and isinstance(solutions, tuple) and not isinstance(solutions[0], tuple):
        solutions = [solutions]
    max_spread = params.get('max_spread', MAX_SPREAD_DECADES)

    if which == 'thm1.3':
        ratios = []
        for solution, report in solutions:
            observed = solution.remainder.weighted_norm(1.0 + solution.r)
            scale = theorem_shape(which, solution.a, solution.r) * report.forcing_size
            ratios.append(observed / scale if scale > 0 else 0.0)
        return build_audit(which, ratios, max_spread=max_spread,
                           details={'cases': [{'a': s.a, 'r': s.r} for s, _ in solutions]})

    ratios, groups = [], []
    for solution in solutions:
        values, radius = _linear_ratios(solution, which)
        ratios.extend(values.tolist())
        groups.append(_radial_trend(values, radius))
    details = {'cases': [{'a': s.a, 'r': s.r, 'force_norm': s.force_norm} for s in solutions]}

    if which == 'thm1.2' and any(s.r == 0.0 for s in solutions):
        plain = np.concatenate([_linear_ratios(s, which, with_log=False)[0] for s in solutions])
        alternative = build_audit('thm1.2_sans_log', plain, max_spread=max_spread)
        with_log = build_audit(which, ratios, groups, max_spread=max_spread)
        details['without_log'] = {'constant': alternative.constant,
                                  'spread_decades': alternative.spread_decades,
                                  'passed': alternative.passed}
        details['log_factor_needed'] = alternative.spread_decades > with_log.spread_decades
        if details['log_factor_needed']:
            logger.info("thm1.2 à r = 0: l'ajustement se dégrade sans le facteur log|a|")
    return build_audit(which, ratios, groups, max_spread=max_spread, details=details)


# =============================================================================
# Cas critique et identité du profil tourbillon
# =============================================================================

@dataclass
class LogMomentFit:
    """m(R) ~ c0 + c1 log R pour une force en O(|y|^-3)."""
    radii: List[float]
    moments: List[float]
    c0: float
    c1: float
    residual: float

    @property
    def diverges(self) -> bool:
        return self.c1 > 0

    def to_dict(self) -> dict:
        return asdict(self)


def log_moment_fit(force: ForceSpec, radii, budget: Optional[QuadratureBudget] = None) -> LogMomentFit:
    """Moments tronqués m(R) et ajustement en log R; résidu relatif max|m - ajustement|/max|m|."""
    budget = budget or default_budget()
    radii = _check_fit_radii(radii)
    moments = np.array([truncated_moment(force, float(R), budget)[0] for R in radii])
    c1, c0 = np.polyfit(np.log(radii), moments, 1)
    scale = float(np.max(np.abs(moments)))
    residual = float(np.max(np.abs(moments - (c0 + c1 * np.log(radii))))) / scale if scale > 0 else 0.0
    logger.info(f"Moment tronqué: m(R) ~ {c0:.4e} + {c1:.4e} log R (résidu {residual:.2%})")
    return LogMomentFit(radii.tolist(), moments.tolist(), float(c0), float(c1), residual)


def vortex_moment_check(budget: Optional[QuadratureBudget] = None,
                        tolerance: float = VORTEX_MOMENT_TOLERANCE) -> dict:
    """|int x^perp . Delta U| = 2 à tolerance près; le signe est rapporté."""
    value, error = laplacian_moment(budget)
    gap = abs(abs(value) - 2.0)
    return {'value': value, 'error': error, 'sign': int(np.sign(value)), 'gap': gap,
            'tolerance': tolerance, 'passed': gap <= tolerance}
