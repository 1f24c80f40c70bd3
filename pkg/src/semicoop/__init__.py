"""Numerical toolkit for semicooperative games on curved strategy grids."""

__version__ = "0.1.0"

from .errors import (
    SemicoopError,
    ValidationError,
    NumericalError,
    GridMismatchError,
    SingularMetricError,
    DegeneratePolygonError,
    RangeOverflowError,
)
from .grids import GridSpec

__all__ = [
    "__version__",
    "SemicoopError",
    "ValidationError",
    "NumericalError",
    "GridMismatchError",
    "SingularMetricError",
    "DegeneratePolygonError",
    "RangeOverflowError",
    "GridSpec",
]
