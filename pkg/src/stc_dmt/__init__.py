"""Lattice space-time codes: enumeration, number-field arithmetic, DMT analysis and simulation."""
__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    DegenerateLatticeError,
    EnumerationBudgetExceeded,
    FitError,
    InconsistentFieldSpec,
    SingularTermError,
    StatisticalFloorError,
    StcDmtError,
    ValidationError,
)
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "__version__", "BACKEND", "StcDmtError", "ValidationError", "DegenerateLatticeError", "FitError",
    "InconsistentFieldSpec", "SingularTermError", "StatisticalFloorError", "EnumerationBudgetExceeded",
]
