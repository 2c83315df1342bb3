"""Exception and warning types shared across the package."""


class PhaseTomoError(Exception):
    """Base class for all package errors."""


class ValidationError(PhaseTomoError, ValueError):
    """Invalid input: bad parameters, wrong shapes, broken invariants."""


class SupportError(ValidationError):
    """A state's essential support does not fit on the grid."""


class GridMismatchError(ValidationError):
    """Two objects that must share a grid do not."""


class CoverageError(ValidationError):
    """Angular coverage is insufficient for the requested operation."""


class FormatError(PhaseTomoError):
    """A file does not conform to its documented format."""


class MassLossWarning(UserWarning):
    """Probability mass left the grid during a phase-space map."""


class NearCoverageWarning(UserWarning):
    """Coverage holds only within the tolerance band."""
