"""Exception hierarchy shared by the numerical modules."""


class CTOAError(Exception):
    """Base class for all package errors."""


class DomainError(CTOAError, ValueError):
    """An argument lies outside the domain of the requested function."""


class AccuracyError(CTOAError, ArithmeticError):
    """A numerical method could not reach its tolerance.

    The achieved error estimate is kept on ``estimate`` so callers can decide
    whether to relax the tolerance or change parameters.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class UnsupportedError(CTOAError, NotImplementedError):
    """The request is valid but outside what an analytic path can serve."""


class BracketError(CTOAError, RuntimeError):
    """A root bracket failed to straddle a sign change."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket
