"""Exception types shared across the package."""


class IsostabError(Exception):
    """Base class for all package errors."""


class ValidationError(IsostabError, ValueError):
    """Input data violates a structural invariant."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(IsostabError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class ConvergenceFailure(IsostabError, RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DegenerateConfiguration(IsostabError, ValueError):
    pass


class NumericError(IsostabError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ContainmentViolated(IsostabError, ValueError):
    pass


class PreconditionUnmet(IsostabError, ValueError):
    pass


class HypothesisUnmet(IsostabError, ValueError):
    pass


class PrecisionFailure(IsostabError, RuntimeError):
    pass
