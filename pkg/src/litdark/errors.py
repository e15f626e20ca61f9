"""Error classes carrying the CLI exit code for their failure class."""


class LitDarkError(Exception):
    exit_code = 1


class ConfigError(LitDarkError, ValueError):
    exit_code = 2


class MissingDependencyError(LitDarkError):
    """A stage input (checkpoint, solved policy) is absent."""
    exit_code = 3


class NumericalError(LitDarkError, ArithmeticError):
    exit_code = 4
