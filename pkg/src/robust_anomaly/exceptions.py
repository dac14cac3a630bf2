"""Exception and warning types raised by the estimators."""


class RobustError(Exception):
    """Base class for all errors raised by robust_anomaly."""


class InputError(RobustError, ValueError):
    """Invalid input: wrong shape, non-finite values, parameter out of range."""


class DegenerateScaleError(RobustError, ValueError):
    """A robust scale estimate is zero, so standardized scores are undefined.

    ``tied_values`` holds the value(s) shared by the majority of the data.
    """

    def __init__(self, message, tied_values=()):
        super().__init__(message)
        self.tied_values = tuple(tied_values)


class ExactFitError(RobustError, ArithmeticError):
    """At least h observations lie exactly on a lower-dimensional affine subspace.

    ``normal`` and ``offset`` describe the hyperplane ``normal @ x == offset``
    when it is known.
    """

    def __init__(self, message, normal=None, offset=None, subset=None):
        super().__init__(message)
        self.normal = normal
        self.offset = offset
        self.subset = subset


class SingularMatrixError(RobustError, ArithmeticError):
    """A scatter matrix that must be inverted is singular."""


class NonConvergenceWarning(RuntimeWarning):
    """An iterative procedure stopped at max_iter; the last iterate is returned."""
