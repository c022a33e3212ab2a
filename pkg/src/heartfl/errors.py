"""Exception types raised across the package."""


class HeartFLError(Exception):
    """Base class for all package errors."""


class ParseError(HeartFLError, ValueError):
    """A line of a raw center file could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ConfigError(HeartFLError, ValueError):
    pass


class SplitError(HeartFLError, ValueError):
    pass


class ContractError(HeartFLError, ValueError):
    """An operation was called with inputs that violate its preconditions."""


class UnsupportedFamilyError(HeartFLError, ValueError):
    pass


class EnumerationLimitError(HeartFLError, ValueError):
    pass


class RankDeficiencyError(HeartFLError, ArithmeticError):
    def __init__(self, message, features=()):
        super().__init__(message)
        self.features = tuple(features)
