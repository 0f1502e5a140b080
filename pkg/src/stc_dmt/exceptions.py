"""Exception types shared across the package."""


class StcDmtError(Exception):
    """Base class for all package errors."""


class ValidationError(StcDmtError, ValueError):
    """Bad input or a violated precondition."""


class DegenerateLatticeError(ValidationError):
    """The basis matrices are not linearly independent over the reals."""


class FitError(ValidationError):
    """Data unsuitable for a requested fit."""


class InconsistentFieldSpec(ValidationError):
    """A number field description fails one of its structural checks."""


class SingularTermError(ValidationError):
    """A determinant sum met a singular matrix."""


class StatisticalFloorError(ValidationError):
    """Too few observed errors for a slope fit."""

    def __init__(self, message, failing=()):
        super().__init__(message)
        self.failing = list(failing)


class EnumerationBudgetExceeded(StcDmtError):
    """An enumeration or code construction would exceed its size cap."""

    def __init__(self, radius, cap, what="enumeration budget exceeded"):
        super().__init__(f"{what}: radius {radius!r} yields more than {cap} points")
        self.radius = radius
        self.cap = cap
