"""Gram-matrix views of training data.

The package treats a data matrix as a bilinear object: rows are
observations, columns are observables, and the two Gram matrices it
generates carry the geometry of both spaces. On top of that sit exact
spectral factorizations, every closed-form solution of the two-layer
linear autoencoder, gradient training rules that converge to those
solutions, occupation statistics of the induced overlap graph and exact
harmonic dynamics generated by the Gram quadratic form.
"""

from . import cli, dimred, gram, ingest, optim, oscillator, spectral, statmech
from .errors import (
    BoseDivergence,
    ConvergenceFailure,
    DimensionMismatch,
    Diverged,
    EmptySelection,
    GramkitError,
    IndexOutOfRank,
    InfeasibleConstraints,
    NotConverged,
    RankTooLarge,
    TruncatedFile,
    WrongMagic,
    ZeroDimension,
    ZeroSingularValue,
    ZeroVariance,
)

__version__ = "0.1.0"

__all__ = [
    "cli",
    "dimred",
    "gram",
    "ingest",
    "optim",
    "oscillator",
    "spectral",
    "statmech",
    "BoseDivergence",
    "ConvergenceFailure",
    "DimensionMismatch",
    "Diverged",
    "EmptySelection",
    "GramkitError",
    "IndexOutOfRank",
    "InfeasibleConstraints",
    "NotConverged",
    "RankTooLarge",
    "TruncatedFile",
    "WrongMagic",
    "ZeroDimension",
    "ZeroSingularValue",
    "ZeroVariance",
    "__version__",
]
