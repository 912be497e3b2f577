"""Numerical self-testing of quantum correlations at finite dimension."""

__version__ = "0.1.0"

from . import chsh, clifford, dilation, games, matcore, models, schur
from .errors import (
    NotConverged,
    NotEquivalent,
    NotHermitianError,
    NotOptimal,
    NotPSD,
    SelfTestError,
    ShapeError,
    ValidationError,
)

__all__ = [
    "chsh",
    "clifford",
    "dilation",
    "games",
    "matcore",
    "models",
    "schur",
    "NotConverged",
    "NotEquivalent",
    "NotHermitianError",
    "NotOptimal",
    "NotPSD",
    "SelfTestError",
    "ShapeError",
    "ValidationError",
]
