"""Exception hierarchy shared by all modules."""


class MorseError(Exception):
    """Base class for library errors."""


class RankDeficient(MorseError):
    """A basis handed to a constructor does not have full column rank."""


class DirectSumFailure(MorseError):
    """Two subspaces that should be complementary intersect."""


class NotHyperbolic(MorseError):
    """An operator has spectrum on (or numerically on) the imaginary axis."""


class LambdaTooLarge(MorseError):
    """The requested coercivity constant exceeds the spectral gap."""


class TooFar(MorseError):
    """Two subspaces are not close enough for a graph representation."""


class NoConvergence(MorseError):
    """An iterative procedure stalled before reaching its tolerance."""


class ContractionLost(MorseError):
    """The graph transform is not a contraction on the chosen box."""


class NonHyperbolicRestPoint(MorseError):
    """A rest point has a degenerate linearization."""


class NonTransverse(MorseError):
    """Stable and unstable manifolds fail to meet transversally."""


class UnresolvedOrbit(MorseError):
    """A connecting orbit could not be resolved to the requested accuracy."""


class BoundaryNotSquareZero(MorseError):
    """The assembled boundary operator does not satisfy d o d = 0."""


class SpecError(MorseError):
    """Malformed problem specification, with an optional source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
