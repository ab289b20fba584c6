"""
Configuration d'un run: fichier INI ([run], [force], [probes], [budget],
[nonlinear], [output]) et surcharges --set section.cle=valeur.

Exemple:

    [run]
    a = 1.0
    r = 0.5

    [force]
    preset = rot_bump
    strength = 0.01

    [probes]
    rays = 8
    radii = 1, 2, 4, 8, 16, 32, 64
"""
import configparser
import logging
import re
from dataclasses import dataclass, field, asdict
from typing import Dict, Optional, Sequence, Tuple

from src import config
from src.errors import ConfigError
from src.quadrature.budget import QuadratureBudget, default_budget
from src.solver.nonlinear import DEFAULT_DELTA, DEFAULT_MAX_ITER, DEFAULT_STOP_TOL

logger = logging.getLogger(__name__)

SECTIONS = ('run', 'force', 'probes', 'budget', 'nonlinear', 'output')
KERNEL_KINDS = ('gamma', 'grad_gamma', 'K', 'H', 'B')
VERIFY_STAGES = ('kernel', 'gamma', 'lemma21', 'thm1.1', 'critical', 'thm1.2', 'weak', 'divergence', 'thm1.3',
                 'vortex')

_FORCE_KEYS = ('preset',)
_FORCE_PARAMETERS = ('strength', 'antisymmetric')


@dataclass
class RunConfig:
    """Paramètres validés d'un run."""
    a: float = 1.0
    r: float = 0.5
    seed: int = 0
    a_values: Tuple[float, ...] = (0.25, 1.0, 4.0)
    r_values: Tuple[float, ...] = (0.0, 0.5)
    checks: Tuple[str, ...] = VERIFY_STAGES
    force: str = 'rot_bump'
    force_params: Dict[str, float] = field(default_factory=dict)
    rays: int = 8
    radii: Tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    kernel: str = 'gamma'
    points: Tuple[Tuple[float, ...], ...] = ()
    budget: QuadratureBudget = field(default_factory=default_budget)
    delta: float = DEFAULT_DELTA
    stop_tol: float = DEFAULT_STOP_TOL
    max_iter: int = DEFAULT_MAX_ITER
    grid_radii: int = 24
    grid_inner: float = 0.1
    grid_outer: float = 64.0
    grid_angles: int = 32
    uniqueness: bool = True
    output_dir: str = config.OUTPUT_DIR
    json_only: bool = False
    threads: int = config.THREADS
    source: Optional[str] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data['budget'] = self.budget.to_dict()
        return data


# =============================================================================
# Lecture
# =============================================================================

def _locate(text: Optional[str], section: str, key: str) -> Optional[int]:
    """Numéro de ligne (1-based) de la clé dans la section, None si introuvable."""
    if not text:
        return None
    current = None
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        header = re.match(r'^\[([^\]]+)\]$', stripped)
        if header:
            current = header.group(1).strip().lower()
        elif current == section and re.match(rf'^{re.escape(key)}\s*[=:]', stripped, re.IGNORECASE):
            return number
    return None


class _Reader:
    """Accès typés aux valeurs, avec diagnostics champ/ligne."""

    def __init__(self, parser: configparser.ConfigParser, text: Optional[str]):
        self.parser = parser
        self.text = text

    def error(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(message, field=f"{section}.{key}", line=_locate(self.text, section, key))

    def raw(self, section: str, key: str) -> Optional[str]:
        if not self.parser.has_option(section, key):
            return None
        return self.parser.get(section, key).strip()

    def number(self, section: str, key: str, default, cast=float):
        raw = self.raw(section, key)
        if raw is None or raw == '':
            return default
        try:
            return cast(raw)
        except ValueError:
            raise self.error(section, key, f"valeur '{raw}' invalide ({cast.__name__} attendu)")

    def numbers(self, section: str, key: str, default) -> Tuple[float, ...]:
        raw = self.raw(section, key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(float(v) for v in re.split(r'[,\s]+', raw) if v)
        except ValueError:
            raise self.error(section, key, f"liste de nombres invalide: '{raw}'")

    def names(self, section: str, key: str, default) -> Tuple[str, ...]:
        raw = self.raw(section, key)
        if raw is None:
            return tuple(default)
        return tuple(v for v in re.split(r'[,\s]+', raw) if v)

    def tuples(self, section: str, key: str) -> Tuple[Tuple[float, ...], ...]:
        raw = self.raw(section, key)
        if not raw:
            return ()
        try:
            return tuple(tuple(float(v) for v in re.split(r'[,\s]+', chunk.strip()) if v)
                         for chunk in raw.split(';') if chunk.strip())
        except ValueError:
            raise self.error(section, key, f"liste de points invalide: '{raw}'")

    def flag(self, section: str, key: str, default: bool) -> bool:
        if not self.parser.has_option(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"booléen invalide: '{self.raw(section, key)}'")


def apply_overrides(parser: configparser.ConfigParser, overrides: Sequence[str]) -> None:
    """Applique les surcharges 'section.cle=valeur'."""
    for item in overrides or ():
        match = re.match(r'^\s*([A-Za-z_]+)\.([A-Za-z_0-9]+)\s*=(.*)$', item)
        if not match:
            raise ConfigError(f"Surcharge invalide '{item}' (forme section.cle=valeur)", field=item)
        section, key, value = match.group(1).lower(), match.group(2), match.group(3).strip()
        if section not in SECTIONS:
            raise ConfigError(f"Section inconnue '{section}'", field=f"{section}.{key}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)


def _read_parser(path: Optional[str]) -> Tuple[configparser.ConfigParser, Optional[str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=('#',))
    parser.optionxform = str
    text = None
    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"Fichier de configuration illisible: {e}", field='--config')
        try:
            parser.read_string(text, source=path)
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ConfigError(f"Syntaxe INI invalide dans {path}", line=line)
        except configparser.Error as e:
            line = getattr(e, 'lineno', None)
            raise ConfigError(f"Configuration invalide: {e.message}", line=line)
        unknown = [s for s in parser.sections() if s not in SECTIONS]
        if unknown:
            raise ConfigError(f"Section inconnue '{unknown[0]}'", field=unknown[0],
                              line=_locate_section(text, unknown[0]))
    return parser, text


def _locate_section(text: str, section: str) -> Optional[int]:
    for number, line in enumerate(text.splitlines(), 1):
        if line.strip().lower() == f"[{section}]":
            return number
    return None


def load_run_config(path: Optional[str] = None, overrides: Sequence[str] = (),
                    output_dir: Optional[str] = None, threads: Optional[int] = None,
                    json_only: Optional[bool] = None) -> RunConfig:
    """Lit, surcharge et valide la configuration.

    Raises:
        ConfigError: valeur invalide, avec le champ et la ligne du fichier.
    """
    parser, text = _read_parser(path)
    apply_overrides(parser, overrides)
    rd = _Reader(parser, text)

    base = default_budget()
    budget_kwargs = {
        'abs_tol': rd.number('budget', 'abs_tol', base.abs_tol),
        'rel_tol': rd.number('budget', 'rel_tol', base.rel_tol),
        'max_evals': rd.number('budget', 'max_evals', base.max_evals, int),
        'max_periods': rd.number('budget', 'max_periods', base.max_periods, int),
        'truncation_radius_cap': rd.number('budget', 'truncation_cap', base.truncation_radius_cap),
    }
    try:
        budget = QuadratureBudget(**budget_kwargs)
        scale = rd.number('budget', 'scale', 1.0)
        if scale != 1.0:
            budget = budget.scaled(scale)
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field='budget', line=_locate_section(text or '', 'budget'))

    force_params = {}
    if parser.has_section('force'):
        for key in parser.options('force'):
            if key in _FORCE_KEYS:
                continue
            if key not in _FORCE_PARAMETERS:
                raise rd.error('force', key, f"paramètre de force inconnu '{key}'")
            force_params[key] = rd.number('force', key, None)

    cfg = RunConfig(
        a=rd.number('run', 'a', 1.0),
        r=rd.number('run', 'r', 0.5),
        seed=rd.number('run', 'seed', 0, int),
        a_values=rd.numbers('run', 'a_values', RunConfig.a_values),
        r_values=rd.numbers('run', 'r_values', RunConfig.r_values),
        checks=rd.names('run', 'checks', VERIFY_STAGES),
        force=rd.raw('force', 'preset') or 'rot_bump',
        force_params=force_params,
        rays=rd.number('probes', 'rays', 8, int),
        radii=rd.numbers('probes', 'radii', RunConfig.radii),
        kernel=rd.raw('probes', 'kernel') or 'gamma',
        points=rd.tuples('probes', 'points'),
        budget=budget,
        delta=rd.number('nonlinear', 'delta', DEFAULT_DELTA),
        stop_tol=rd.number('nonlinear', 'stop_tol', DEFAULT_STOP_TOL),
        max_iter=rd.number('nonlinear', 'max_iter', DEFAULT_MAX_ITER, int),
        grid_radii=rd.number('nonlinear', 'grid_radii', 24, int),
        grid_inner=rd.number('nonlinear', 'grid_inner', 0.1),
        grid_outer=rd.number('nonlinear', 'grid_outer', 64.0),
        grid_angles=rd.number('nonlinear', 'grid_angles', 32, int),
        uniqueness=rd.flag('nonlinear', 'uniqueness', True),
        output_dir=output_dir or rd.raw('output', 'dir') or config.OUTPUT_DIR,
        json_only=json_only if json_only is not None else rd.flag('output', 'json_only', False),
        threads=threads if threads is not None else rd.number('run', 'threads', config.THREADS, int),
        source=path,
    )
    _validate(cfg, rd)
    logger.debug(f"Configuration chargée: {cfg.to_dict()}")
    return cfg


def _validate(cfg: RunConfig, rd: _Reader) -> None:
    if cfg.a == 0:
        raise rd.error('run', 'a', "a = 0 non admis: le problème plan n'a pas de solution fondamentale "
                                   "(paradoxe de Stokes)")
    if not 0.0 <= cfg.r < 1.0:
        raise rd.error('run', 'r', f"r = {cfg.r} hors de [0, 1)")
    if any(a == 0 for a in cfg.a_values):
        raise rd.error('run', 'a_values', "a = 0 non admis dans le balayage")
    if any(not 0.0 <= r < 1.0 for r in cfg.r_values):
        raise rd.error('run', 'r_values', "valeurs de r hors de [0, 1)")
    unknown = [c for c in cfg.checks if c not in VERIFY_STAGES]
    if unknown:
        raise rd.error('run', 'checks', f"contrôle inconnu '{unknown[0]}' ({', '.join(VERIFY_STAGES)})")
    if cfg.rays < 1:
        raise rd.error('probes', 'rays', f"rays = {cfg.rays} < 1")
    if not cfg.radii or any(r <= 0 for r in cfg.radii):
        raise rd.error('probes', 'radii', "rayons de sonde positifs requis")
    if cfg.kernel not in KERNEL_KINDS:
        raise rd.error('probes', 'kernel', f"noyau '{cfg.kernel}' inconnu ({', '.join(KERNEL_KINDS)})")
    width = 4 if cfg.kernel in ('gamma', 'grad_gamma') else 3
    for point in cfg.points:
        if len(point) != width:
            raise rd.error('probes', 'points', f"{width} composantes attendues par point pour '{cfg.kernel}'")
    if cfg.delta <= 0 or cfg.stop_tol <= 0 or cfg.max_iter < 1:
        raise rd.error('nonlinear', 'delta', "delta, stop_tol et max_iter doivent être positifs")
    if cfg.grid_radii < 4 or not 0 < cfg.grid_inner < cfg.grid_outer:
        raise rd.error('nonlinear', 'grid_radii', "grille polaire invalide (>= 4 rayons, 0 < inner < outer)")
    if cfg.grid_angles < 8 or cfg.grid_angles % 2:
        raise rd.error('nonlinear', 'grid_angles', f"grid_angles = {cfg.grid_angles} (pair, >= 8)")
    if cfg.threads < 0:
        raise rd.error('run', 'threads', f"threads = {cfg.threads} < 0")