"""Exception hierarchy shared by every effortnet module."""


class EffortNetError(Exception):
    """Base class for all library errors."""


class ValidationError(EffortNetError, ValueError):
    """Input does not describe a valid network, scheme or profile."""


class TopologyError(ValidationError):
    pass


class NonTopologicalNumbering(TopologyError):
    pass


class MultipleParents(TopologyError):
    pass


class CycleError(TopologyError):
    pass


class DisconnectedHierarchy(TopologyError):
    pass


class NotDescendant(ValidationError):
    pass


class BudgetViolated(ValidationError):
    pass


class NonPositiveGamma(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class NumericalError(EffortNetError):
    """A numerical routine failed to produce a trustworthy answer."""


class NoConvergence(NumericalError):
    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class IterationLimit(NumericalError):
    pass


class LpNumericalFailure(NumericalError):
    pass


class DegenerateOutput(NumericalError):
    """Equilibrium social output is zero, so the PoA is infinite."""

    poa = float("inf")


class NearDegenerateWarning(UserWarning):
    pass


class NoConvergenceWarning(UserWarning):
    pass
