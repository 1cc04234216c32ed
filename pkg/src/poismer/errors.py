"""Exception types shared across the package."""


class PoismerError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PoismerError):
    """Input array shapes are inconsistent."""


class ExponentOverflow(PoismerError):
    """A mean-function exponent exceeded the overflow guard (700).

    This usually signals an iterate far outside the norm-ball feasible
    region, i.e. a solver bug or badly chosen radii.
    """


class NonConvexProx(PoismerError):
    """Scalar prox weight does not exceed the penalty's weak-convexity
    constant, so the scalar subproblem may have ties."""


class SingularHessian(PoismerError):
    """Newton system unsolvable even after ridge escalation."""


class MaxIterations(PoismerError):
    """Iteration cap reached without convergence."""


class IllConditioned(PoismerError):
    """A restricted matrix failed a conditioning or Cholesky check."""


class InsufficientReplicates(PoismerError):
    """No subject has two or more visits; noise covariance not estimable."""


class CholeskyFailure(PoismerError):
    """Covariance factorization failed."""


class AllFitsFailed(PoismerError):
    """Every point on the regularization grid raised an error."""
