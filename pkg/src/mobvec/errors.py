"""Exception hierarchy shared across the package.

Two branches matter for exit codes: InputError covers anything wrong with
files, configuration, or argument values (CLI exit status 2), NumericError
covers convergence and finiteness failures (exit status 1).
"""


class MobvecError(Exception):
    pass


class InputError(MobvecError):
    """Bad input data, configuration, or arguments."""


class ParseError(InputError):
    """Malformed file content; message carries the line number."""


class SchemaError(InputError):
    """Structurally valid file violating a documented constraint."""


class DomainError(InputError):
    """A value outside an operation's domain (unknown id, zero vector, ...)."""


class FitError(InputError):
    """Not enough usable data to fit a model."""


class MatchingError(InputError):
    """A pole-matching quota that cannot be filled."""


class NumericError(MobvecError):
    """Numeric failure during computation."""


class ConvergenceError(NumericError):
    """An iteration hit its cap before reaching tolerance."""


class TrainingError(NumericError):
    """Non-finite values encountered during training."""
