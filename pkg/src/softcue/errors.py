"""Exception types raised across the package."""


class SoftcueError(Exception):
    """Base class for all package errors."""


class TraceParseError(SoftcueError, ValueError):
    """A trace CSV could not be parsed.

    The 1-based line number of the offending row is kept in ``line``.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientDataError(SoftcueError, ValueError):
    pass


class NoRampError(SoftcueError, ValueError):
    pass


class SingularFitError(SoftcueError, ValueError):
    pass


class DomainError(SoftcueError, ValueError):
    """An input lies outside the domain of a formula (division by zero etc.)."""


class FitError(SoftcueError, RuntimeError):
    pass


class ConvergenceError(SoftcueError, RuntimeError):
    pass
