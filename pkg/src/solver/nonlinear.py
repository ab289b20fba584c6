"""
Problème non linéaire (NS_a): u = alpha U + v par itération de Picard.

    alpha = 1/2 int y^perp . f dy
    U(x)  = (1/2 pi) x^perp/|x|^2 (1 - e^{-|x|^2/4})
    Phi[w] = S_a^{-1}[f + alpha Delta U] + S_a^{-1}[div F(w)],
    F(w) = -alpha (U (x) w + w (x) U) - w (x) w

U résout S_a avec la force -Delta U (pression nulle, terme de rotation nul),
et int y^perp . (-Delta U) = 2: la force f + alpha Delta U est de moment nul,
ce qui supprime le profil x^perp/|x|^2 du reste v.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np

from src.errors import ConvergenceFailure, DomainError, NonContractionError
from src.kernel.geometry import as_vec, norm2, outer, perp
from src.kernel.kernels import PERP_JACOBIAN, d1_factor, e_factor
from src.quadrature.budget import DecayClass, QuadratureBudget, default_budget
from src.quadrature.plane import integrate_plane, singular_potential
from src.solver.field import IterateField
from src.solver.forces import ForceSpec, envelope_bound, force_weighted_norm
from src.solver.polar import PolarGreenOperator, PolarGrid
from src.solver.pool import map_ordered

logger = logging.getLogger(__name__)

VORTEX_SERIES_RADIUS = 1e-3      # sur |x|^2
DEFAULT_DELTA = 0.1
DEFAULT_STOP_TOL = 1e-6
DEFAULT_MAX_ITER = 30
GROWTH_LIMIT = 3


# =============================================================================
# Profil tourbillon
# =============================================================================

def vortex_U(x) -> np.ndarray:
    """U(x) = (1/2 pi)(x^perp/|x|^2)(1 - e^{-|x|^2/4}); série x^perp/(8 pi)(1 - |x|^2/8 + |x|^4/96) près de 0."""
    x = as_vec(x)
    r2 = norm2(x)
    small = r2 < VORTEX_SERIES_RADIUS
    safe = np.where(small, 1.0, r2)
    closed = -np.expm1(-safe / 4.0) / (2.0 * np.pi * safe)
    series = (1.0 - r2 / 8.0 + r2 ** 2 / 96.0) / (8.0 * np.pi)
    return perp(x) * np.where(small, series, closed)[..., None]


def grad_vortex_U(x) -> np.ndarray:
    """d U_j / d x_k, forme (..., k, j)."""
    x = as_vec(x)
    s = norm2(x) / 4.0
    phi = e_factor(s) / (8.0 * np.pi)
    dphi = -d1_factor(s) / (8.0 * np.pi)
    return (PERP_JACOBIAN * phi[..., None, None]
            + (x[..., :, None] * perp(x)[..., None, :]) * (dphi / 2.0)[..., None, None])


def vortex_vorticity(x) -> np.ndarray:
    """curl U = e^{-|x|^2/4}/(4 pi)."""
    return np.exp(-norm2(as_vec(x)) / 4.0) / (4.0 * np.pi)


def laplacian_U(x) -> np.ndarray:
    """Delta U = (-d2 G, d1 G) avec G = e^{-|x|^2/4}/(4 pi), d_i G = -(x_i/2) G."""
    x = as_vec(x)
    g = vortex_vorticity(x)
    return np.stack([x[..., 1] / 2.0 * g, -x[..., 0] / 2.0 * g], axis=-1)


def vortex_forcing(x) -> np.ndarray:
    """-Delta U: la force dont U est la solution de S_a (à pression nulle près)."""
    return -laplacian_U(x)


# |Delta U| = rho e^{-rho^2/4}/(8 pi), |x^perp . Delta U| = rho^2 e^{-rho^2/4}/(8 pi)
VORTEX_FORCING_DECAY = DecayClass(
    exponent=6.0, bound=envelope_bound(lambda rho: rho * np.exp(-rho ** 2 / 4) / (8 * np.pi), 6.0, 30.0))
VORTEX_MOMENT_DECAY = DecayClass(
    exponent=5.0, bound=envelope_bound(lambda rho: rho ** 2 * np.exp(-rho ** 2 / 4) / (8 * np.pi), 5.0, 30.0))


def laplacian_moment(budget: Optional[QuadratureBudget] = None):
    """int x^perp . Delta U dx par quadrature (vaut -2 par intégration par parties).

    L'écart de signe avec la normalisation +2 est journalisé; la force de
    profil utilisée par l'itération est -Delta U, de moment +2.
    """
    budget = budget or default_budget()
    value, error = integrate_plane(
        lambda p: np.sum(perp(p) * laplacian_U(p), axis=-1),
        VORTEX_MOMENT_DECAY, budget,
    )
    value = float(value)
    if value < 0:
        logger.warning(
            f"int x^perp . Delta U = {value:.8f} (signe négatif): "
            "la force de profil utilisée est -Delta U, de moment +2"
        )
    return value, float(error)


# =============================================================================
# Données de la force
# =============================================================================

def compute_alpha(force: ForceSpec, budget: Optional[QuadratureBudget] = None) -> float:
    """alpha = 1/2 int y^perp . f dy."""
    budget = budget or default_budget()
    if not force.is_pointwise:
        raise DomainError("alpha est défini pour une force ponctuelle")
    force.require_moment()
    d = force.decay
    moment_decay = DecayClass(d.exponent - 1.0, d.bound, d.support_radius)
    if moment_decay.exponent <= 2:
        raise DomainError(f"y^perp . f non intégrable: exposant {moment_decay.exponent} <= 2")
    value, _ = integrate_plane(lambda p: np.sum(perp(p) * force(p), axis=-1), moment_decay, budget)
    return 0.5 * float(value)


def forcing_size(force: ForceSpec, r: float, budget: Optional[QuadratureBudget] = None,
                 n_radii: int = 64, n_angles: int = 32) -> float:
    """lambda(f) = ||f||_{L^inf_{3+r}} (échantillonné) + ||y^perp . f||_{L^1}."""
    budget = budget or default_budget()
    force.require_moment()
    sup = force_weighted_norm(force, 3.0 + r, budget.truncation_radius_cap, n_radii, n_angles)
    d = force.decay
    l1, _ = integrate_plane(lambda p: np.abs(np.sum(perp(p) * force(p), axis=-1)),
                            DecayClass(d.exponent - 1.0, d.bound, d.support_radius), budget)
    return sup + float(l1)


def quadratic_tensor(U, w, alpha: float) -> np.ndarray:
    """F = -alpha (U (x) w + w (x) U) - w (x) w, forme (..., 2, 2), symétrique."""
    return -alpha * (outer(U, w) + outer(w, U)) - outer(w, w)


# =============================================================================
# Itération de Picard
# =============================================================================

@dataclass
class PicardReport:
    """Historique d'une itération de Picard."""
    alpha: float
    forcing_size: float
    norms: List[float] = field(default_factory=list)
    differences: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    tau_obs: Optional[float] = None
    converged: bool = False
    iterations: int = 0
    in_ball: List[bool] = field(default_factory=list)
    delta: float = DEFAULT_DELTA
    stop_tol: float = DEFAULT_STOP_TOL
    tail_fit_residual: Optional[float] = None
    moment_check: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NonlinearSolution:
    """u = alpha U + v, v porté par un IterateField."""
    alpha: float
    remainder: IterateField
    a: float
    r: float

    def velocity(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.alpha * vortex_U(points) + self.remainder(points)

    def gradient(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.alpha * grad_vortex_U(points) + self.remainder.gradient(points)

    def divergence(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        vortex = np.trace(grad_vortex_U(points), axis1=-2, axis2=-1)
        return self.alpha * vortex + self.remainder.divergence(points)

    def convection(self, points) -> np.ndarray:
        """(u . grad) u, forme (n, 2)."""
        u = self.velocity(points)
        return np.einsum('nk,nkj->nj', u, self.gradient(points))

    def to_rows(self, pressure=None):
        """Une ligne par noeud de grille; p vide si la pression n'a pas été calculée."""
        grid = self.remainder.grid
        points = grid.points.reshape(-1, 2)
        u = self.velocity(points)
        v = self.remainder.values.reshape(-1, 2)
        pressure = [None] * len(points) if pressure is None else np.asarray(pressure, dtype=float)
        return [{'x1': p[0], 'x2': p[1], 'u1': uu[0], 'u2': uu[1], 'p': pp, 'v1': vv[0], 'v2': vv[1]}
                for p, uu, pp, vv in zip(points, u, pressure, v)]


class PicardSolver:
    """Itération w_{n+1} = Phi[w_n] sur une grille polaire."""

    def __init__(self, force: ForceSpec, a: float, r: float, grid: Optional[PolarGrid] = None,
                 budget: Optional[QuadratureBudget] = None, operator: Optional[PolarGreenOperator] = None,
                 workers: Optional[int] = None, delta: float = DEFAULT_DELTA):
        if a == 0:
            raise DomainError("a = 0 non admis")
        if not 0.0 <= r < 1.0:
            raise DomainError(f"r={r} hors de [0, 1)")
        self.force = force
        self.a = a
        self.r = r
        self.budget = budget or default_budget()
        self.grid = grid or PolarGrid.logarithmic()
        self.operator = operator or PolarGreenOperator(a, self.grid, self.budget, workers)
        self.delta = delta
        self.alpha = compute_alpha(force, self.budget)
        self._sources = self.grid.source_points
        self._U_sources = vortex_U(self._sources)
        self._absolute = None

    @property
    def absolute_term(self) -> np.ndarray:
        """S_a^{-1}[f + alpha Delta U] sur la grille (indépendant de w)."""
        if self._absolute is None:
            g = self.force(self._sources.reshape(-1, 2)).reshape(self._sources.shape)
            g = g + self.alpha * laplacian_U(self._sources)
            self._absolute = self.operator.apply_pointforce(g)
        return self._absolute

    def picard_map(self, w: IterateField) -> IterateField:
        """Phi[w] aux noeuds de la grille."""
        norm = w.weighted_norm()
        if norm > self.delta:
            logger.warning(f"Itéré hors de la boule: ||w|| = {norm:.3e} > delta = {self.delta:g}")
        if not np.any(w.values):
            return w.with_values(self.absolute_term.copy())
        w_sources = w(self._sources.reshape(-1, 2)).reshape(self._sources.shape)
        F = quadratic_tensor(self._U_sources, w_sources, self.alpha)
        return w.with_values(self.absolute_term + self.operator.apply_divform(F))

    def solve(self, stop_tol: float = DEFAULT_STOP_TOL, max_iter: int = DEFAULT_MAX_ITER,
              initial: Optional[IterateField] = None, size: Optional[float] = None):
        """Itère depuis initial (0 par défaut) jusqu'à ||w_{n+1} - w_n|| < stop_tol.

        Raises:
            NonContractionError: les trois premières différences ne décroissent
                pas, ou la norme croît trois fois de suite.
        """
        w = initial or IterateField.zeros(self.grid, self.r)
        if size is None:
            size = forcing_size(self.force, self.r, self.budget)
        report = PicardReport(alpha=self.alpha, forcing_size=size, delta=self.delta, stop_tol=stop_tol)
        logger.info(f"Picard: alpha={self.alpha:.6e}, lambda(f)={size:.3e}, a={self.a:g}, r={self.r:g}")
        growth = 0
        for n in range(1, max_iter + 1):
            nxt = self.picard_map(w)
            diff = (nxt - w).weighted_norm()
            norm = nxt.weighted_norm()
            report.differences.append(diff)
            report.norms.append(norm)
            report.in_ball.append(norm <= self.delta)
            report.iterations = n
            if n >= 2:
                previous = report.differences[-2]
                report.ratios.append(diff / previous if previous > 0 else 0.0)
                report.tau_obs = max(report.ratios)
            logger.info(f"  iteration {n}: ||w||={norm:.3e}, ||w_n+1 - w_n||={diff:.3e}")
            w = nxt
            if diff < stop_tol:
                report.converged = True
                break
            # croissance de la norme sans décroissance des différences
            diverging = n >= 2 and norm > report.norms[-2] and diff >= report.differences[-2]
            growth = growth + 1 if diverging else 0
            if growth >= GROWTH_LIMIT:
                raise NonContractionError(
                    f"Picard diverge: norme croissante {GROWTH_LIMIT} fois de suite "
                    f"(lambda(f)={size:.3e}); réduire la force", report=report)
            if n == 3 and not (report.differences[1] < report.differences[0]
                               and report.differences[2] < report.differences[1]):
                raise NonContractionError(
                    f"Picard ne contracte pas sur les trois premiers itérés "
                    f"(différences {report.differences}); réduire la force", report=report)
        report.tail_fit_residual = w.tail_fit_residual()
        if report.converged and report.tau_obs is not None and report.tau_obs >= 1.0:
            raise NonContractionError(f"Facteur de contraction observé {report.tau_obs:.3f} >= 1", report=report)
        if not report.converged:
            logger.warning(f"Picard non convergé après {max_iter} itérations")
        return NonlinearSolution(self.alpha, w, self.a, self.r), report


def solve_nonlinear(force: ForceSpec, a: float, r: float, stop_tol: float = DEFAULT_STOP_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, budget: Optional[QuadratureBudget] = None,
                    grid: Optional[PolarGrid] = None, workers: Optional[int] = None,
                    delta: float = DEFAULT_DELTA, initial: Optional[IterateField] = None):
    """Construit u = alpha U + v; retourne (NonlinearSolution, PicardReport)."""
    solver = PicardSolver(force, a, r, grid, budget, workers=workers, delta=delta)
    return solver.solve(stop_tol, max_iter, initial)


def random_divergence_free_field(grid: PolarGrid, r: float, amplitude: float, seed: int = 0,
                                 n_bumps: int = 3) -> IterateField:
    """Champ initial perp-gradient d'une somme de bosses gaussiennes aléatoires."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-2.0, 2.0, size=(n_bumps, 2))
    scales = rng.uniform(0.5, 1.5, size=n_bumps)
    signs = rng.choice([-1.0, 1.0], size=n_bumps)

    def field_fn(points):
        out = np.zeros((len(points), 2))
        for c, s, sign in zip(centers, scales, signs):
            d = points - c
            psi = np.exp(-norm2(d) / (2 * s ** 2))
            out += sign * np.stack([d[:, 1], -d[:, 0]], axis=-1) * (psi / s ** 2)[:, None]
        return out

    raw = IterateField.from_function(grid, field_fn, r)
    norm = raw.weighted_norm()
    return raw.with_values(raw.values * (amplitude / norm if norm > 0 else 0.0))


def uniqueness_probe(solver: PicardSolver, reference: NonlinearSolution, stop_tol: float = DEFAULT_STOP_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, seed: int = 0, size: Optional[float] = None) -> dict:
    """Relance depuis un champ aléatoire de norme delta/2 et compare les points fixes."""
    initial = random_divergence_free_field(solver.grid, solver.r, 0.5 * solver.delta, seed)
    other, report = solver.solve(stop_tol, max_iter, initial, size=size)
    gap = (other.remainder - reference.remainder).weighted_norm()
    logger.info(f"Unicité: écart entre points fixes {gap:.3e} (seuil {10 * stop_tol:.1e})")
    return {'gap': gap, 'threshold': 10.0 * stop_tol, 'passed': gap <= 10.0 * stop_tol,
            'iterations': report.iterations, 'converged': report.converged}


def contraction_monotonicity(solver: PicardSolver, report: PicardReport, stop_tol: float = DEFAULT_STOP_TOL,
                             max_iter: int = DEFAULT_MAX_ITER, factor: float = 2.0) -> dict:
    """Relance avec la force multipliée par factor: tau_obs ne doit pas diminuer.

    Une non-contraction de la relance compte comme une croissance de tau.
    """
    scaled = PicardSolver(solver.force.scaled(factor), solver.a, solver.r, solver.grid, solver.budget,
                          operator=solver.operator, delta=solver.delta)
    try:
        _, bigger = scaled.solve(stop_tol, max_iter, size=factor * report.forcing_size)
        tau = bigger.tau_obs
    except NonContractionError as e:
        logger.info(f"Force x{factor:g}: non-contraction ({e})")
        tau = float('inf')
    base = report.tau_obs
    # tau indéfini: convergence en moins de deux itérations
    passed = base is None or tau is None or tau >= base
    logger.info(f"Monotonie de tau: {base} -> {tau} (force x{factor:g})")
    return {'tau': base, 'tau_scaled': tau, 'factor': factor, 'passed': passed}


# =============================================================================
# Pression
# =============================================================================

def pressure_nonlinear(solution: NonlinearSolution, force: ForceSpec, x,
                       budget: Optional[QuadratureBudget] = None) -> float:
    """p(x) = (1/2 pi) int (x-y)/|x-y|^2 . (f - u . grad u)(y) dy."""
    budget = budget or default_budget()
    outer_radius = solution.remainder.grid.rho[-1]
    probe = solution.remainder.grid.points.reshape(-1, 2)

    def density(points):
        return force(points) - solution.convection(points)

    samples = density(probe)
    weights = (1.0 + np.linalg.norm(probe, axis=-1)) ** 3
    bound = 2.0 * float(np.max(weights * np.linalg.norm(samples, axis=-1))) + 1e-300
    decay = DecayClass(exponent=3.0, bound=bound)
    try:
        value, _ = singular_potential(x, density, decay, budget)
    except ConvergenceFailure as e:
        logger.error(f"Pression non linéaire non convergée en {np.asarray(x).tolist()} (R grille {outer_radius:g})")
        raise e.annotate(f"pression en x={np.asarray(x).tolist()}") from e
    return float(value)


def pressure_on_grid(solution: NonlinearSolution, force: ForceSpec, budget: Optional[QuadratureBudget] = None,
                     workers: Optional[int] = None) -> np.ndarray:
    """p aux noeuds de la grille de v, dans l'ordre de to_rows."""
    budget = budget or default_budget()
    points = solution.remainder.grid.points.reshape(-1, 2)
    logger.info(f"Pression non linéaire sur {len(points)} noeuds")
    values = map_ordered(lambda x: pressure_nonlinear(solution, force, x, budget), points, workers)
    return np.asarray(values, dtype=float)
