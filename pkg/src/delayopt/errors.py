"""Exception types shared across the package."""


class DelayOptError(Exception):
    """Base class for all package errors."""


class ValidationError(DelayOptError):
    """Invalid input data. Carries a short machine-readable code."""

    code = "config"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class MissingFieldError(ValidationError):
    code = "missing-field"


class DimensionError(ValidationError):
    code = "dimension"


class GeneratorError(ValidationError):
    code = "generator"


class ReducibleChainError(ValidationError):
    code = "reducible"


class RankConditionError(ValidationError):
    code = "rank"


class HurwitzError(ValidationError):
    code = "hurwitz"


class RegulatorError(ValidationError):
    code = "regulator"


class ResourceError(DelayOptError):
    """Problem size exceeds a hard limit of an exhaustive algorithm."""


class HistoryUnderflowError(DelayOptError):
    """A delayed sample was requested outside the retained history window."""


class DivergenceError(DelayOptError):
    """Simulated state left the finite range; carries the blow-up time."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class SolverUndecidedError(DelayOptError):
    """The feasibility solver stopped without a trustworthy verdict."""


class InfeasibleBaseError(DelayOptError):
    """Delay-margin search requires feasibility at zero delay."""
