"""Exception taxonomy.

Two families matter to callers: ValidationError for bad inputs or
configs (CLI exit code 1) and NumericalError for failures arising
during computation (CLI exit code 2).
"""


class NlwaveError(Exception):
    """Base class for all package errors."""


class ValidationError(NlwaveError, ValueError):
    """Inputs violate a documented precondition (shapes, domains, config)."""


class SymmetryError(ValidationError):
    """A vector or matrix fails a required symmetry to tolerance."""


class CapacityError(ValidationError):
    """A requested problem size exceeds the documented guard."""


class NumericalError(NlwaveError, RuntimeError):
    """A computation failed numerically."""


class SingularMatrixError(NumericalError):
    """A pivot fell below the singularity tolerance."""


class ConvergenceError(NumericalError):
    """An iteration exceeded its sweep budget."""


class DegenerateUpdateError(NumericalError):
    """A rank-one update hit its degenerate direction (u^t E^-1 u ~ 1)."""


class BlowUpError(NumericalError):
    """Trajectory left the trusted numerical range."""
