"""Exception hierarchy shared by all modules."""


class DDAEError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DDAEError, ValueError):
    pass


class ConfigError(DDAEError, ValueError):
    """Invalid configuration; ``problems`` lists every offending key."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])


class NumericError(DDAEError, ArithmeticError):
    pass


class StepIndexError(DDAEError, IndexError):
    pass


class StateError(DDAEError, RuntimeError):
    pass


class ParseError(DDAEError, ValueError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class SplitError(DDAEError, ValueError):
    pass


class UndefinedMetricError(DDAEError, ValueError):
    pass
