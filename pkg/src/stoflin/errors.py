"""Exception hierarchy shared by every stoflin module."""


class StoflinError(Exception):
    """Base class for all errors raised by stoflin."""


class ParseError(StoflinError, ValueError):
    """Malformed input. ``offset`` is the byte offset of the failure in expression text, if known."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.message = message
        self.offset = offset


class DimensionError(StoflinError, ValueError):
    pass


class EvaluationError(StoflinError, ArithmeticError):
    pass


class DomainError(EvaluationError):
    """A function was evaluated outside its domain (ln of a nonpositive number, ...)."""


class UnboundParameterError(EvaluationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class TooManyDomainFailures(EvaluationError):
    pass


class IntegrationError(StoflinError):
    """The antiderivative table has no entry for the integrand."""


class ConventionError(StoflinError, ValueError):
    pass


class PreconditionError(StoflinError, ValueError):
    pass


class SingularDistributionError(StoflinError):
    pass


class LinearizationError(StoflinError):
    """A linearization pipeline stage failed; ``stage`` names the failing stage."""

    def __init__(self, stage, message, diagnostics=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = dict(diagnostics or {})


class BudgetExceededError(StoflinError):
    pass
