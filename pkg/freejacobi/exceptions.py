"""
Error hierarchy for the freejacobi toolkit.

Every error carries the process exit code the CLI reports for it:
2 for usage and parameter problems, 3 for numeric failures.
"""

from typing import Any, Dict, Optional


class FreeJacobiError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 3

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DomainError(FreeJacobiError, ValueError):
    """A precondition on the arguments does not hold."""

    exit_code = 2


class PoleError(DomainError):
    """Evaluation requested at a pole (z = 1 or z = -1)."""


class InconsistentInput(FreeJacobiError, ValueError):
    """Inputs are individually valid but disagree with each other."""

    exit_code = 2


class NumericError(FreeJacobiError):
    """A solver failed to converge; diagnostics describe the failure."""


class SingularApproach(NumericError):
    """A characteristic came within 1e-9 of a pole of V."""

    def __init__(self, message: str, last_state: Optional[Dict[str, Any]] = None):
        super().__init__(message, diagnostics=last_state)
        self.last_state = self.diagnostics


class InstabilityError(NumericError):
    """A moment left the unit interval during integration."""


class ChartFold(NumericError):
    """Exit times along a ray are not monotone, even after refinement."""


class NoSolution(FreeJacobiError):
    """The angle lies outside the support arc of the free unitary Brownian motion."""


class ExteriorPoint(FreeJacobiError):
    """The angle is not reached by any characteristic at the requested time."""
