"""
Commandes de la CLI: kernel-probe, linear-solve, divform-solve,
nonlinear-solve et verify.

Codes de sortie:
    0  succès / toutes les vérifications passent
    1  au moins une vérification échoue
    2  configuration invalide (ConfigError, DomainError)
    3  échec numérique (ConvergenceFailure, Picard non convergé)
    4  non-contraction de Picard (NonContractionError)
"""
import logging
import os
import time
from dataclasses import replace
from typing import Callable, Dict, List, Optional

import numpy as np

from src.cli.presets import build_force, critical_tangential, divform_gauss, rot_bump
from src.cli.run_config import RunConfig
from src.errors import ConfigError, ConvergenceFailure, DomainError, NonContractionError, RotflowError
from src.kernel import fundamental_solution, grad_fundamental_solution, kernel_B, kernel_H, kernel_K
from src.output.writers import (
    KERNEL_COLUMNS, NONLINEAR_COLUMNS, SOLUTION_COLUMNS, write_csv, write_json, write_schema,
)
from src.solver import (
    ForceSpec, LinearSolution, PicardSolver, PolarGreenOperator, PolarGrid, POINTWISE,
    default_test_functions, force_weighted_norm, forcing_size, linear_weak_residual, probe_geometry,
    solve_linear, solve_linear_divform, solve_linear_pointforce, truncated_moment, weak_form_residual,
)
from src.solver.linear import density_decay
from src.solver.nonlinear import contraction_monotonicity, laplacian_moment, pressure_on_grid, uniqueness_probe
from src.verification import (
    adjoint_symmetry_check, audit_lemma21, audit_theorem_bounds, b_time_integral_check,
    build_audit, default_lemma21_samples, extract_rotational_coefficient, field_divergence_check, fit_decay,
    fit_solution_decay, gradient_consistency_check, gradient_time_integral_audit,
    h_time_integral_check, k_decomposition_check, log_moment_fit, rotation_covariance_check,
    series_branch_check, velocity_divergence_check, vortex_moment_check,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONTRACTION = 4

# Seuils des contrôles de verify
COEFFICIENT_RADIUS = 40.0
COEFFICIENT_TOLERANCE = 0.03
EXPONENT_TOLERANCE = 0.1
PRESSURE_EXPONENT = 0.9
CRITICAL_RESIDUAL = 0.05
# m(|x|/2) est encore négligeable en deçà
CRITICAL_MIN_RADIUS = 4.0
SYMMETRIC_COEFFICIENT = 1e-3
# itéré de Picard interpolé: résidu rapporté à int f . phi
WEAK_RELATIVE_TOLERANCE = 1e-2
# une résolution linéaire par noeud de règle: deux fonctions test
WEAK_TEST_FUNCTIONS = default_test_functions()[:2]
DIVERGENCE_RAYS = 4
DIVERGENCE_RADII = (2.0, 6.0)
PICARD_MAX_ITERATIONS = 6
PICARD_MAX_TAU = 0.5
TARGET_FORCING_SIZE = 1e-2
RING_ANGLES = 16


def exit_code_for(exc: BaseException) -> int:
    """Code de sortie associé à une exception."""
    if isinstance(exc, NonContractionError):
        return EXIT_NONCONTRACTION
    if isinstance(exc, ConvergenceFailure):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, DomainError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


# =============================================================================
# Utilitaires
# =============================================================================

def _workers(cfg: RunConfig) -> Optional[int]:
    return cfg.threads or None


def _force(cfg: RunConfig, kind: Optional[str] = None) -> ForceSpec:
    force = build_force(cfg.force, **cfg.force_params)
    if kind is not None and force.kind != kind:
        raise ConfigError(f"La force '{cfg.force}' est de type {force.kind}, {kind} attendu",
                          field='force.preset')
    return force


def _grid(cfg: RunConfig) -> PolarGrid:
    return PolarGrid.logarithmic(cfg.grid_radii, cfg.grid_inner, cfg.grid_outer, cfg.grid_angles)


def _path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.output_dir, name)


def _emit(cfg: RunConfig, rows: List[dict], columns: List[str], summary: dict, name: str) -> None:
    """solution.csv (sauf --json-only), le JSON du run et schema.json."""
    if cfg.json_only:
        summary = dict(summary, rows=rows)
    else:
        write_csv(rows, _path(cfg, 'solution.csv'), columns)
    write_json(summary, _path(cfg, name))
    write_schema(cfg.output_dir, columns)


def _moment_limit(force: ForceSpec, cfg: RunConfig) -> Optional[float]:
    """m(infini) (ou int F12 - F21) quand il existe, sinon None."""
    if not force.angular_moment_integrable:
        return None
    radius = force.decay.support_radius or cfg.budget.truncation_radius_cap
    value, _ = truncated_moment(force, radius, cfg.budget)
    return value


def _probe_field(force: ForceSpec, a: float, cfg: RunConfig) -> Callable:
    """Vitesse à la demande par le solveur linéaire (sans pression)."""
    def field(points):
        return solve_linear(force, a, points, cfg.budget, r=cfg.r, workers=_workers(cfg),
                            with_pressure=False).velocity
    return field


def _fit_or_none(solution: LinearSolution, quantity: str):
    try:
        return fit_solution_decay(solution, quantity)
    except DomainError as e:
        logger.info(f"Pas d'ajustement de décroissance ({quantity}): {e}")
        return None


def _remainder_norm(solution: LinearSolution) -> float:
    radius = np.linalg.norm(solution.probes, axis=-1)
    weights = (1.0 + radius) ** (1.0 + solution.r)
    return float(np.max(weights * np.linalg.norm(solution.remainder, axis=-1), initial=0.0))


# =============================================================================
# kernel-probe
# =============================================================================

def _matrix_row(kind: str, matrix, error: float, **coords) -> dict:
    row = {'kernel': kind, 'm11': matrix[0, 0], 'm12': matrix[0, 1],
           'm21': matrix[1, 0], 'm22': matrix[1, 1], 'err_est': error}
    row.update(coords)
    return row


def kernel_rows(cfg: RunConfig) -> List[dict]:
    rows = []
    for point in cfg.points:
        if cfg.kernel in ('gamma', 'grad_gamma'):
            x, y = np.array(point[:2]), np.array(point[2:])
            coords = {'x1': x[0], 'x2': x[1], 'y1': y[0], 'y2': y[1]}
            if cfg.kernel == 'gamma':
                value, error = fundamental_solution(cfg.a, x, y, budget=cfg.budget)
                rows.append(_matrix_row('gamma', value, error, **coords))
            else:
                value, error = grad_fundamental_solution(cfg.a, x, y, budget=cfg.budget)
                for k in range(2):
                    rows.append(_matrix_row('grad_gamma', value[k], error, k=k + 1, **coords))
        else:
            z, t = np.array(point[:2]), point[2]
            fn = {'K': kernel_K, 'H': kernel_H, 'B': kernel_B}[cfg.kernel]
            rows.append(_matrix_row(cfg.kernel, fn(z, t), 0.0, x1=z[0], x2=z[1], t=t))
    return rows


def cmd_kernel_probe(cfg: RunConfig) -> int:
    """Valeurs des noyaux aux points demandés (une ligne par point et dérivée)."""
    logger.info(f"kernel-probe: noyau {cfg.kernel}, {len(cfg.points)} points, a={cfg.a:g}")
    rows = kernel_rows(cfg)
    summary = {'command': 'kernel-probe', 'config': cfg.to_dict(), 'n_rows': len(rows)}
    _emit(cfg, rows, KERNEL_COLUMNS, summary, 'summary.json')
    return EXIT_OK


# =============================================================================
# linear-solve / divform-solve
# =============================================================================

def _linear_command(cfg: RunConfig, kind: str, solver: Callable, name: str) -> int:
    force = _force(cfg, kind)
    probes = probe_geometry(cfg.rays, cfg.radii)
    started = time.perf_counter()
    solution = solver(force, cfg.a, probes, cfg.budget, r=cfg.r, workers=_workers(cfg))
    largest = float(max(cfg.radii))
    coefficient = extract_rotational_coefficient(_probe_field(force, cfg.a, cfg), largest, RING_ANGLES)
    limit = _moment_limit(force, cfg)
    remainder_fit = _fit_or_none(solution, 'remainder')
    pressure_fit = _fit_or_none(solution, 'pressure')
    summary = {
        'command': name,
        'config': cfg.to_dict(),
        'force': {'name': force.name, 'kind': force.kind, 'parameters': force.parameters,
                  'norm': solution.force_norm},
        'coefficient': {'radius': largest, 'value': coefficient, 'moment_limit': limit,
                        'relative_gap': (abs(coefficient - limit) / abs(limit)) if limit else None},
        'moments': {'radii': (np.linalg.norm(solution.probes, axis=-1) / 2.0).tolist(),
                    'values': solution.moment.tolist()},
        'remainder_norm': _remainder_norm(solution),
        'remainder_decay': remainder_fit,
        'pressure_decay': pressure_fit,
        'max_error': float(np.max(solution.errors, initial=0.0)),
        'elapsed_s': time.perf_counter() - started,
    }
    logger.info(f"{name}: coefficient dominant {coefficient:.6e} (m(inf) = {limit})")
    _emit(cfg, solution.rows(), SOLUTION_COLUMNS, summary, 'summary.json')
    return EXIT_OK


def cmd_linear_solve(cfg: RunConfig) -> int:
    """Problème linéaire à force ponctuelle."""
    return _linear_command(cfg, POINTWISE, solve_linear_pointforce, 'linear-solve')


def cmd_divform_solve(cfg: RunConfig) -> int:
    """Problème linéaire à force en forme divergence."""
    return _linear_command(cfg, 'divergence_form', solve_linear_divform, 'divform-solve')


# =============================================================================
# nonlinear-solve
# =============================================================================

def cmd_nonlinear_solve(cfg: RunConfig) -> int:
    """Itération de Picard; le rapport est écrit même en cas de non-contraction."""
    force = _force(cfg, POINTWISE)
    grid = _grid(cfg)
    solver = PicardSolver(force, cfg.a, cfg.r, grid, cfg.budget, workers=_workers(cfg), delta=cfg.delta)
    size = forcing_size(force, cfg.r, cfg.budget)
    base = {'command': 'nonlinear-solve', 'config': cfg.to_dict(), 'grid': grid.to_dict()}
    try:
        solution, report = solver.solve(cfg.stop_tol, cfg.max_iter, size=size)
    except NonContractionError as e:
        write_json(dict(base, report=e.report, error=str(e)), _path(cfg, 'report.json'))
        raise
    report.moment_check, _ = laplacian_moment(cfg.budget)
    payload = dict(base, report=report, alpha=solution.alpha)
    radii = [r for r in cfg.radii if grid.rho[0] <= r <= grid.rho[-1]]
    try:
        payload['remainder_decay'] = fit_decay(solution.remainder, radii, cfg.rays)
    except DomainError as e:
        logger.info(f"Pas d'ajustement de décroissance du reste: {e}")
    residual, residuals = weak_form_residual(solution.velocity, None, force, cfg.a, budget=cfg.budget,
                                             nonlinear=True)
    payload['weak_residual'] = {'max': residual, 'per_test': residuals}
    if cfg.uniqueness and report.converged:
        payload['uniqueness'] = uniqueness_probe(solver, solution, cfg.stop_tol, cfg.max_iter,
                                                 cfg.seed, size)
    pressure = pressure_on_grid(solution, force, cfg.budget, _workers(cfg))
    _emit(cfg, solution.to_rows(pressure), NONLINEAR_COLUMNS, payload, 'report.json')
    if not report.converged:
        logger.error(f"Picard non convergé en {cfg.max_iter} itérations")
        return EXIT_NUMERICAL
    return EXIT_OK


# =============================================================================
# verify
# =============================================================================

def _entry(name: str, result) -> dict:
    data = result.to_dict() if hasattr(result, 'to_dict') else dict(result)
    data.setdefault('name', name)
    data['passed'] = bool(data.get('passed', False))
    return data


def _run_check(report: List[dict], name: str, fn: Callable) -> None:
    """Exécute un contrôle; une erreur numérique le marque en échec sans interrompre verify."""
    started = time.perf_counter()
    try:
        results = fn()
    except RotflowError as e:
        logger.error(f"Contrôle {name} en erreur: {e}")
        report.append({'name': name, 'passed': False, 'error': str(e), 'exit_code': exit_code_for(e)})
        return
    for result in results if isinstance(results, list) else [results]:
        entry = _entry(name, result)
        entry['stage'] = name
        entry['elapsed_s'] = time.perf_counter() - started
        report.append(entry)


def _kernel_stage(cfg: RunConfig):
    return [k_decomposition_check(seed=cfg.seed), h_time_integral_check(seed=cfg.seed + 1, budget=cfg.budget),
            series_branch_check()]


def _gamma_stage(cfg: RunConfig):
    return [adjoint_symmetry_check(seed=cfg.seed + 2, budget=cfg.budget),
            rotation_covariance_check(seed=cfg.seed + 3, budget=cfg.budget),
            gradient_consistency_check(cfg.a, budget=cfg.budget),
            b_time_integral_check(budget=cfg.budget),
            gradient_time_integral_audit(cfg.a, budget=cfg.budget)]


def _sweep_linear(force: ForceSpec, cfg: RunConfig, solver: Callable) -> Dict[float, LinearSolution]:
    """Une résolution par valeur de a (la vitesse ne dépend pas de r)."""
    probes = probe_geometry(cfg.rays, cfg.radii)
    return {a: solver(force, a, probes, cfg.budget, r=cfg.r, workers=_workers(cfg)) for a in cfg.a_values}


def _with_r(solution: LinearSolution, force: ForceSpec, r: float, base: float) -> LinearSolution:
    return replace(solution, r=r, force_norm=force_weighted_norm(force, base + r))


def _thm11_stage(cfg: RunConfig):
    force = rot_bump(1.0)
    solutions = _sweep_linear(force, cfg, solve_linear_pointforce)
    sweep = [_with_r(s, force, r, 3.0) for s in solutions.values() for r in cfg.r_values]
    results = [audit_theorem_bounds(sweep, 'thm1.1')]

    limit = _moment_limit(force, cfg)
    coefficient = extract_rotational_coefficient(_probe_field(force, cfg.a, cfg), COEFFICIENT_RADIUS, RING_ANGLES)
    gap = abs(coefficient - limit) / abs(limit)
    results.append({'name': 'thm1.1_coefficient', 'value': coefficient, 'moment_limit': limit,
                    'relative_gap': gap, 'passed': gap <= COEFFICIENT_TOLERANCE})

    reference = solutions.get(cfg.a, next(iter(solutions.values())))
    remainder = fit_solution_decay(reference, 'remainder')
    pressure = fit_solution_decay(reference, 'pressure')
    target = 1.0 + cfg.r - EXPONENT_TOLERANCE
    results.append({'name': 'thm1.1_decay', 'remainder': remainder, 'pressure': pressure,
                    'target': target, 'pressure_target': PRESSURE_EXPONENT,
                    'passed': remainder.pooled_exponent >= target and pressure.pooled_exponent >= PRESSURE_EXPONENT})
    return results


def _critical_stage(cfg: RunConfig):
    force = critical_tangential(1.0)
    fit = log_moment_fit(force, (2.0, 4.0, 8.0, 16.0, 32.0, 64.0), cfg.budget)
    results = [{'name': 'critical_log_moment', 'fit': fit,
                'passed': fit.c1 > 0 and fit.residual < CRITICAL_RESIDUAL}]
    probes = probe_geometry(cfg.rays, [r for r in cfg.radii if CRITICAL_MIN_RADIUS <= r <= 64.0])
    solution = solve_linear_pointforce(force, cfg.a, probes, cfg.budget, r=0.0, workers=_workers(cfg),
                                       with_pressure=False)
    weighted = (1.0 + np.linalg.norm(probes, axis=-1)) * np.linalg.norm(solution.velocity, axis=-1)
    results.append(build_audit('critical_weighted_velocity', weighted))
    return results


def _thm12_stage(cfg: RunConfig):
    force = divform_gauss(1.0, antisymmetric=0.0)
    solutions = _sweep_linear(force, cfg, solve_linear_divform)
    sweep = [_with_r(s, force, r, 2.0) for s in solutions.values() for r in cfg.r_values]
    results = [audit_theorem_bounds(sweep, 'thm1.2')]

    reference = solutions.get(cfg.a, next(iter(solutions.values())))
    norm = force_weighted_norm(force, 2.0)
    largest = float(np.max(np.abs(reference.moment)))
    results.append({'name': 'thm1.2_symmetric_coefficient', 'value': largest, 'bound': SYMMETRIC_COEFFICIENT * norm,
                    'passed': largest < SYMMETRIC_COEFFICIENT * norm})
    decay = fit_solution_decay(reference, 'remainder')
    target = 1.0 + cfg.r - EXPONENT_TOLERANCE
    results.append({'name': 'thm1.2_decay', 'remainder': decay, 'target': target,
                    'passed': decay.pooled_exponent >= target})

    # f = div F en force ponctuelle contre la forme divergence, en une sonde
    pointwise = ForceSpec(POINTWISE, force.pointwise_density, density_decay(force), name='div_divform_gauss')
    probe = np.array([[4.0, 1.0]])
    direct = solve_linear_pointforce(pointwise, cfg.a, probe, cfg.budget, with_pressure=False)
    divform = solve_linear_divform(force, cfg.a, probe, cfg.budget, with_pressure=False)
    gap = float(np.max(np.abs(direct.velocity - divform.velocity)))
    allowed = float(direct.errors[0] + divform.errors[0]) + 2.0 * cfg.budget.tolerance(direct.velocity)
    results.append({'name': 'thm1.2_cross_check', 'gap': gap, 'allowed': allowed, 'passed': gap <= allowed})
    return results


def _weak_stage(cfg: RunConfig):
    """Résidus faibles: solution linéaire aux noeuds d'une règle fixe, Picard sur la grille.

    Le seuil linéaire est déduit des erreurs rapportées; l'itéré de Picard,
    interpolé sur la grille, reste rapporté à int f . phi.
    """
    results = []
    for force in (rot_bump(1.0), divform_gauss(1.0, antisymmetric=0.5)):
        checks = linear_weak_residual(force, cfg.a, cfg.budget, WEAK_TEST_FUNCTIONS, _workers(cfg))
        results.append({'name': f'weak_{force.name}', 'checks': checks,
                        'passed': all(c.passed for c in checks)})
    grid = _grid(cfg)
    operator = PolarGreenOperator(cfg.a, grid, cfg.budget, _workers(cfg))
    zero = lambda p: np.zeros((len(p), 2))
    solution, _ = _picard(cfg, cfg.a, operator, grid)
    force = _small_rot_bump(cfg)
    residual, _ = weak_form_residual(solution.velocity, None, force, cfg.a, budget=cfg.budget, nonlinear=True)
    scale, _ = weak_form_residual(zero, None, force, cfg.a, budget=cfg.budget)
    relative = residual / scale if scale > 0 else residual
    results.append({'name': 'weak_nonlinear', 'residual': residual, 'scale': scale,
                    'relative': relative, 'passed': relative <= WEAK_RELATIVE_TOLERANCE})
    return results


def _divergence_stage(cfg: RunConfig):
    """div u = 0: différences finies sur les solutions linéaires, gradient de spline pour Picard."""
    results = []
    points = probe_geometry(DIVERGENCE_RAYS, DIVERGENCE_RADII)
    for force in (rot_bump(1.0), divform_gauss(1.0, antisymmetric=0.5)):
        def velocity(stencil, force=force):
            solution = solve_linear(force, cfg.a, stencil, cfg.budget, workers=_workers(cfg), with_pressure=False)
            return solution.velocity, solution.errors

        results.append(velocity_divergence_check(f'div_{force.name}', velocity, points))
    grid = _grid(cfg)
    solution, _ = _picard(cfg, cfg.a, grid=grid)
    # anneaux intérieurs: ni modèle affine ni queue
    nodes = grid.points[1:-1].reshape(-1, 2)
    results.append(field_divergence_check('div_nonlinear', solution, nodes))
    return results


def _small_rot_bump(cfg: RunConfig) -> ForceSpec:
    """Bosse rotationnelle de taille lambda(f) = TARGET_FORCING_SIZE (lambda est linéaire en s)."""
    unit = forcing_size(rot_bump(1.0), cfg.r, cfg.budget)
    return rot_bump(TARGET_FORCING_SIZE / unit)


def _picard(cfg: RunConfig, a: float, operator=None, grid=None):
    grid = grid or _grid(cfg)
    solver = PicardSolver(_small_rot_bump(cfg), a, cfg.r, grid, cfg.budget, operator=operator,
                          workers=_workers(cfg), delta=cfg.delta)
    solution, report = solver.solve(cfg.stop_tol, cfg.max_iter, size=TARGET_FORCING_SIZE)
    return solution, report


def _thm13_stage(cfg: RunConfig):
    grid = _grid(cfg)
    runs, results = [], []
    for a in cfg.a_values:
        operator = PolarGreenOperator(a, grid, cfg.budget, _workers(cfg))
        solver = PicardSolver(_small_rot_bump(cfg), a, cfg.r, grid, cfg.budget, operator=operator,
                              workers=_workers(cfg), delta=cfg.delta)
        solution, report = solver.solve(cfg.stop_tol, cfg.max_iter, size=TARGET_FORCING_SIZE)
        runs.append((solution, report))
        contraction = (report.converged and report.iterations <= PICARD_MAX_ITERATIONS
                       and (report.tau_obs is None or report.tau_obs < PICARD_MAX_TAU))
        results.append({'name': f'thm1.3_picard_a{a:g}', 'report': report, 'passed': contraction})
        if a == cfg.a:
            probe = uniqueness_probe(solver, solution, cfg.stop_tol, cfg.max_iter, cfg.seed, TARGET_FORCING_SIZE)
            results.append(dict(probe, name='thm1.3_uniqueness'))
            monotone = contraction_monotonicity(solver, report, cfg.stop_tol, cfg.max_iter)
            results.append(dict(monotone, name='thm1.3_tau_monotone'))
    results.insert(0, audit_theorem_bounds(runs, 'thm1.3'))
    return results


def _vortex_stage(cfg: RunConfig):
    return dict(vortex_moment_check(cfg.budget), name='vortex_moment')


STAGES: Dict[str, Callable] = {
    'kernel': _kernel_stage,
    'gamma': _gamma_stage,
    'lemma21': lambda cfg: audit_lemma21(cfg.a_values, default_lemma21_samples(), cfg.budget),
    'thm1.1': _thm11_stage,
    'critical': _critical_stage,
    'thm1.2': _thm12_stage,
    'weak': _weak_stage,
    'divergence': _divergence_stage,
    'thm1.3': _thm13_stage,
    'vortex': _vortex_stage,
}


def cmd_verify(cfg: RunConfig) -> int:
    """Rapport consolidé; code 0 si et seulement si tous les contrôles passent."""
    started = time.perf_counter()
    checks: List[dict] = []
    for stage in cfg.checks:
        logger.info(f"verify: étape {stage}")
        _run_check(checks, stage, lambda stage=stage: STAGES[stage](cfg))
    failed = [c['name'] for c in checks if not c['passed']]
    report = {
        'command': 'verify',
        'config': cfg.to_dict(),
        'checks': checks,
        'failed': failed,
        'passed': not failed,
        'elapsed_s': time.perf_counter() - started,
    }
    write_json(report, _path(cfg, 'report.json'))
    if failed:
        logger.error(f"verify: {len(failed)} contrôle(s) en échec: {', '.join(failed)}")
        return EXIT_VERIFICATION
    logger.info(f"verify: {len(checks)} contrôles passés")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    'kernel-probe': cmd_kernel_probe,
    'linear-solve': cmd_linear_solve,
    'divform-solve': cmd_divform_solve,
    'nonlinear-solve': cmd_nonlinear_solve,
    'verify': cmd_verify,
}
