"""
Configuration centralisée du logging pour rotflow.
Importer ce module une seule fois au démarrage (main.py).
"""
import logging
from src.config import LOG_LEVEL


def setup_logging(level: str = None):
    """Configure le logging pour toute l'application."""
    level = (level or LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
    )
