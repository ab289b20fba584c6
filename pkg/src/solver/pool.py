"""
Répartition des sondes indépendantes sur un pool de threads.

Les résultats sont rendus dans l'ordre des entrées (sommes déterministes).
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

from src import config

logger = logging.getLogger(__name__)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Nombre de threads: argument, sinon ROTFLOW_THREADS, sinon nombre de coeurs."""
    workers = config.THREADS if workers is None else workers
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def map_ordered(fn: Callable, items: Iterable, workers: Optional[int] = None) -> List:
    """Applique fn à chaque élément, en parallèle si workers > 1, résultats ordonnés."""
    items = list(items)
    workers = min(resolve_workers(workers), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]
    logger.debug(f"{len(items)} tâches sur {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
