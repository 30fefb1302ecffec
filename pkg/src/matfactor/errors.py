"""Exception types raised by the matfactor package.

Every error carries a ``payload`` dict of machine-readable context so the
command line layer can emit structured diagnostics without string parsing.
"""

from __future__ import annotations


class MatfactorError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, **payload):
        super().__init__(message)
        self.message = message
        self.payload = dict(payload)


class DimensionMismatch(MatfactorError):
    """Operands have incompatible shapes."""


class NonFinite(MatfactorError):
    """Data contains NaN or infinite entries."""


class TooFewObservations(MatfactorError):
    """The series is too short for the requested operation."""


class ZeroVarianceCell(MatfactorError):
    """A cell series is constant, so it cannot be scaled to unit variance."""


class LagTooLarge(MatfactorError):
    """Requested lag leaves no complete observation pairs."""


class DegenerateSpectrum(MatfactorError):
    """Leading eigenvalue is numerically zero; rank ratios are undefined."""


class ConvergenceFailure(MatfactorError):
    """An iterative numerical routine failed to converge."""


class NotOrthonormal(MatfactorError):
    """A matrix expected to have orthonormal columns does not."""


class NotSPD(MatfactorError):
    """A matrix expected to be symmetric positive definite is not."""


class UnstableAR(MatfactorError):
    """An autoregressive coefficient has modulus >= 1."""


class PanelTooLarge(MatfactorError):
    """The flattened panel exceeds the size limit for the vectorized route."""


class SchemaError(MatfactorError):
    """An input file violates the documented schema."""


class IncompletePanel(MatfactorError):
    """A long-format file does not cover every (t, row, col) cell exactly once."""


class ScheduleInvalid(MatfactorError):
    """A validation fold or rolling-window schedule is malformed."""
