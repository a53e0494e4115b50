"""Domain errors shared across the library.

Every error that a computation can raise on bad input or failed
convergence derives from GramkitError, so callers (and the CLI) can
separate domain failures from programming errors.
"""


class GramkitError(Exception):
    """Base class for all domain errors raised by gramkit."""


class WrongMagic(GramkitError):
    """An IDX byte stream starts with an unexpected magic number."""


class TruncatedFile(GramkitError):
    """An IDX byte stream is shorter than its header promises."""


class ZeroDimension(GramkitError):
    """An IDX header declares a zero count, row, or column dimension."""


class EmptySelection(GramkitError):
    """Observation selection produced an empty training matrix."""


class RankTooLarge(GramkitError):
    """A requested rank exceeds what the matrix supports."""


class DimensionMismatch(GramkitError):
    """Vector or matrix shapes are incompatible with the operation."""


class ZeroSingularValue(GramkitError):
    """A scenario needs to invert a singular value that is numerically zero."""


class IndexOutOfRank(GramkitError):
    """A spectral index lies outside the retained rank."""


class ZeroVariance(GramkitError):
    """A correlation was requested for a constant variable."""


class BoseDivergence(GramkitError):
    """Bose-Einstein occupation evaluated where the geometric series diverges."""


class InfeasibleConstraints(GramkitError):
    """Entropy maximization constraints admit no positive solution."""


class ConvergenceFailure(GramkitError):
    """The underlying eigenvalue solver failed to converge."""


class Diverged(GramkitError):
    """An iterative optimizer blew up past the divergence guard."""


class NotConverged(GramkitError):
    """An iterative optimizer ran out of iterations.

    Carries the final deviation from the convergence target in the
    ``deviation`` attribute.
    """

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation
