"""
Exceptions de rotflow.

Chaque famille d'erreur correspond à un code de sortie de la CLI
(voir src/cli/commands.py).
"""
from typing import Any, Optional


class RotflowError(Exception):
    """Base de toutes les erreurs de rotflow."""


class DomainError(RotflowError, ValueError):
    """Précondition mathématique violée (a = 0, x = y, t <= 0, ...)."""


class ConvergenceFailure(RotflowError):
    """Budget de quadrature épuisé avant d'atteindre la tolérance.

    Porte la meilleure valeur partielle et son estimation d'erreur.
    """

    def __init__(self, message: str, value: Any = None, error: Any = None,
                 context: Optional[str] = None):
        super().__init__(message if context is None else f"{message} ({context})")
        self.value = value
        self.error = error
        self.context = context

    def annotate(self, context: str) -> "ConvergenceFailure":
        """Retourne une copie annotée du point de sonde en cause."""
        base = str(self) if self.context is None else str(self).rsplit(' (', 1)[0]
        return ConvergenceFailure(base, value=self.value, error=self.error, context=context)


class NonContractionError(RotflowError):
    """L'itération de Picard ne contracte pas (forçage trop grand)."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


class ConfigError(RotflowError, ValueError):
    """Configuration de run invalide (champ et ligne fautifs)."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        where = []
        if field:
            where.append(f"champ '{field}'")
        if line is not None:
            where.append(f"ligne {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")
        self.field = field
        self.line = line
