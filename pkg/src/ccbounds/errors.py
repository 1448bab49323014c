"""Exception hierarchy shared across the package."""


class CCBoundsError(Exception):
    """Base class for all errors raised by :mod:`ccbounds`."""


class DimensionError(CCBoundsError, ValueError):
    """Array shapes do not agree with the declared dimensions."""


class FeasibilityError(CCBoundsError, ValueError):
    """A parameter vector does not satisfy ``f(theta) = 0``."""


class ConstraintRedundancyError(CCBoundsError, ValueError):
    """The constraint Jacobian is rank deficient at the requested point."""


class SingularChartError(CCBoundsError, ValueError):
    """An analytic basis formula is undefined at the requested point."""


class AlignmentError(CCBoundsError, ValueError):
    """Two subspaces are too far apart for a reliable Procrustes alignment."""


class NotPSDError(CCBoundsError, ValueError):
    """A weighting matrix has a significantly negative eigenvalue."""


class InvalidInputError(CCBoundsError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DegenerateObservationError(CCBoundsError, ArithmeticError):
    """An estimator received a (probability zero) degenerate observation."""


class ConvergenceError(CCBoundsError, ArithmeticError):
    """An iterative solver did not reach its tolerance."""


class DiagnosticError(CCBoundsError, RuntimeError):
    """Too many Monte-Carlo trials failed for the result to be trusted."""


class SpecError(CCBoundsError, ValueError):
    """An experiment specification failed validation."""
