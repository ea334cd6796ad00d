"""Exception types raised across the package."""


class LinExp3Error(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(LinExp3Error):
    pass


class SingularCovariance(LinExp3Error):
    pass


class LossOutOfRange(LinExp3Error):
    """A loss value left [-1, 1]; carries the offending round, context and arm."""

    def __init__(self, message, t=None, x=None, a=None):
        super().__init__(message)
        self.t = t
        self.x = x
        self.a = a


class NonFiniteEstimate(LinExp3Error):
    pass


class MismatchedConfigs(LinExp3Error):
    pass


class NonPositiveValue(LinExp3Error):
    pass


class ParseError(LinExp3Error):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(LinExp3Error):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownSuite(LinExp3Error):
    pass
