"""Exception types raised across the package.

Each class carries the process exit code the CLI uses when it escapes a
command.
"""


class HazardLabError(Exception):
    exit_code = 1


class ConfigError(HazardLabError):
    exit_code = 2


class InvalidInputError(HazardLabError, ValueError):
    exit_code = 3


class UnsupportedLabelError(InvalidInputError):
    """An uncensored event lies beyond the last grid interval."""


class InsufficientDataError(InvalidInputError):
    pass


class UndefinedMetricError(HazardLabError):
    exit_code = 3


class NumericError(HazardLabError, ArithmeticError):
    exit_code = 4

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot
