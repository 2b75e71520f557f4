"""Exception hierarchy shared by all modules."""


class McdError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(McdError, ValueError):
    pass


class DegenerateMatrix(McdError, ValueError):
    pass


class DegenerateSubset(DegenerateMatrix):
    """The selected points lie in a lower-dimensional affine subspace."""


class DegenerateSample(McdError):
    """Every candidate subset of the sample is degenerate."""


class TooLarge(McdError):
    pass


class BadFraction(McdError, ValueError):
    pass


class BracketError(McdError):
    pass


class QuadratureError(McdError):
    pass


class SingularDerivative(McdError):
    """The derivative map is (numerically) singular.

    ``condition`` carries the 2-norm condition number estimate, which may be
    ``inf``.
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class BadBandwidth(McdError, ValueError):
    pass


class BoundaryUndefined(McdError, ValueError):
    pass


class UnknownModel(McdError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
