"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes: validation/configuration
problems exit 2, numerical failures exit 3, I/O failures exit 4.
"""

from __future__ import annotations


class MVHawkesError(Exception):
    """Base class for all package errors."""


class ValidationError(MVHawkesError):
    """Invalid parameters or configuration (exit code 2).

    ``field`` optionally carries the offending key so callers can prefix
    it with the config-block path (e.g. ``hawkes.alpha``).
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConfigurationError(ValidationError):
    """A requested configuration cannot be realised (e.g. a jump law that
    cannot match the supplied moments on its support)."""


class CapabilityError(ValidationError):
    """A request outside the implemented problem sizes (e.g. three or more
    jump components in the grid solver)."""


class NumericalError(MVHawkesError):
    """Numerical failure during a computation (exit code 3)."""


class StepSizeError(NumericalError):
    """A discretisation step is too large for the scheme to be valid."""


class EventCapError(NumericalError):
    """A simulated point-process path exceeded the event safety cap,
    which usually signals a supercritical parameter set."""


class SolverDivergenceError(NumericalError):
    """The Monte Carlo solver produced values outside the admissible range."""


class InvalidGError(NumericalError):
    """A value-function factor outside (0, 1); the frontier formulas are
    undefined there and it indicates an upstream solver failure."""


class IllConditionedError(NumericalError):
    """A matrix needed in closed-form algebra is numerically singular."""


class BlowupError(NumericalError):
    """Too many simulated wealth paths diverged."""


class ResourceError(MVHawkesError):
    """A requested computation exceeds the configured memory budget."""
