"""Exception types raised across the toolkit."""


class PersuasionError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(PersuasionError):
    """An objective could not be evaluated at a belief."""


class NumericFailure(PersuasionError):
    """The LP solver produced a solution that fails its own residual checks."""


class IterationLimit(PersuasionError):
    """An iterative method stopped before converging.

    ``best`` carries the best bundle found so far (solver specific).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SizeLimitExceeded(PersuasionError):
    """A requested grid is larger than the configured cap."""


class OutOfHull(PersuasionError):
    """A moment vector lies outside the convex hull of the state moments."""


class InfeasibleProblem(PersuasionError):
    """No feasible distribution of posteriors exists on the candidate grid."""


class NotBayesPlausible(PersuasionError):
    """A signal does not average back to the prior."""


class SchemaError(PersuasionError, ValueError):
    """An instance file does not follow the schema."""
