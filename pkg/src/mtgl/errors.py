"""Exception types shared across the package."""

from __future__ import annotations


class MTGLError(Exception):
    """Base class for all package errors."""


# -- model validation -------------------------------------------------------

class ModelProblem(MTGLError, ValueError):
    """One violated model invariant."""


class NonSymmetricKernel(ModelProblem):
    pass


class NonPositiveEntry(ModelProblem):
    pass


class MeasureNotNormalized(ModelProblem):
    pass


class CountMismatch(ModelProblem):
    pass


class InvalidModel(MTGLError, ValueError):
    """Raised by ``validate_model`` with every problem found."""

    def __init__(self, problems: list[ModelProblem]):
        self.problems = list(problems)
        super().__init__("; ".join(f"{type(p).__name__}: {p}" for p in self.problems))


# -- numerical failures -----------------------------------------------------

class NumericalError(MTGLError, ArithmeticError):
    """A computation could not produce a trustworthy number."""


class NoConvergence(NumericalError):
    pass


class NoDecay(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class SingularLaplacian(NumericalError):
    pass


class PDViolation(NumericalError):
    pass


class NegativeRateCoefficient(NumericalError):
    pass


class NoExponentialMoment(NumericalError):
    pass


class OverflowGuard(NumericalError):
    pass


class NotSupercritical(NumericalError):
    pass


# -- size / precondition limits ---------------------------------------------

class LimitExceeded(MTGLError, ValueError):
    """Input is outside the range an exact method can handle."""


class DimensionTooLarge(LimitExceeded):
    pass


class TooLarge(LimitExceeded):
    pass


class StateSpaceTooLarge(LimitExceeded):
    pass


class TooManyPartitions(LimitExceeded):
    pass


class LatticeTooLarge(LimitExceeded):
    pass


class PreconditionViolated(MTGLError, ValueError):
    pass


class InsufficientReplicates(MTGLError, ValueError):
    pass


class Explosion(MTGLError):
    """A branching process exceeded its population cap."""

    def __init__(self, population, cap: int):
        self.population = population
        self.cap = cap
        super().__init__(f"population exceeded cap {cap}")


# -- warnings ---------------------------------------------------------------

class NearCriticalWarning(UserWarning):
    pass


class ClampedEdgeWarning(UserWarning):
    pass


class MomentConditionWarning(UserWarning):
    pass
