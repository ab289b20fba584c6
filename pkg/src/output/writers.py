"""
Écriture des artefacts: CSV (RFC-4180, 17 chiffres significatifs), JSON
(un objet par run, champ schema_version) et schema.json (unité/sens de
chaque colonne).
"""
import csv
import json
import logging
import math
import os
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from src.config import SCHEMA_VERSION

logger = logging.getLogger(__name__)

# Colonnes de tous les CSV produits: sens et unité (sans dimension sauf mention)
COLUMN_SCHEMA: Dict[str, str] = {
    'x1': "première coordonnée du point de sonde x",
    'x2': "seconde coordonnée du point de sonde x",
    'y1': "première coordonnée du point source y",
    'y2': "seconde coordonnée du point source y",
    't': "temps de diffusion t > 0 (noyaux K, H, B)",
    'kernel': "noyau évalué: gamma, grad_gamma, K, H ou B",
    'k': "indice de dérivation d/dy_k (grad_gamma), vide sinon",
    'm11': "entrée (1,1) de la matrice du noyau",
    'm12': "entrée (1,2) de la matrice du noyau",
    'm21': "entrée (2,1) de la matrice du noyau",
    'm22': "entrée (2,2) de la matrice du noyau",
    'err_est': "estimation d'erreur absolue de quadrature (0 pour une forme fermée)",
    'u1': "première composante de la vitesse u(x)",
    'u2': "seconde composante de la vitesse u(x)",
    'p': "pression p(x), normalisée par p -> 0 à l'infini",
    'moment': "coefficient dominant: int_{|y|<|x|/2} y^perp . f (ou F12 - F21) dy",
    'rem1': "première composante du reste u - moment x^perp/(4 pi |x|^2)",
    'rem2': "seconde composante du reste u - moment x^perp/(4 pi |x|^2)",
    'v1': "première composante du reste non linéaire v = u - alpha U",
    'v2': "seconde composante du reste non linéaire v = u - alpha U",
}

SOLUTION_COLUMNS = ['x1', 'x2', 'u1', 'u2', 'p', 'moment', 'rem1', 'rem2', 'err_est']
NONLINEAR_COLUMNS = ['x1', 'x2', 'u1', 'u2', 'p', 'v1', 'v2']
KERNEL_COLUMNS = ['kernel', 'x1', 'x2', 'y1', 'y2', 't', 'k', 'm11', 'm12', 'm21', 'm22', 'err_est']


def format_value(value) -> str:
    """Nombre en 17 chiffres significatifs ('.' décimal), chaîne vide pour None."""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    return str(value)


def write_csv(rows: Iterable[dict], path: str, columns: Sequence[str]) -> str:
    """Écrit les lignes (en-tête seul si vide); retourne le chemin."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\r\n', quoting=csv.QUOTE_MINIMAL)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(col)) for col in columns])
            count += 1
    logger.info(f"CSV écrit: {path} ({count} lignes)")
    return path


def to_jsonable(value):
    """Convertit récursivement numpy et les flottants non finis en types JSON."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if hasattr(value, 'to_dict'):
        return to_jsonable(value.to_dict())
    return value


def write_json(payload: dict, path: str) -> str:
    """Un objet JSON par run, avec schema_version."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    document = {'schema_version': SCHEMA_VERSION}
    document.update(to_jsonable(payload))
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, ensure_ascii=False, indent=2)
    logger.info(f"JSON écrit: {path}")
    return path


def write_schema(directory: str, columns: Optional[List[str]] = None) -> str:
    """schema.json: sens et unité de chaque colonne émise."""
    columns = columns or list(COLUMN_SCHEMA)
    return write_json({'columns': {c: COLUMN_SCHEMA[c] for c in columns}},
                      os.path.join(directory, 'schema.json'))
