"""Exception hierarchy shared by all pipeline stages.

Each class carries the process exit code the CLI maps it to.
"""


class StancewatchError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class InputPathError(StancewatchError):
    """A required input file or directory is missing or unreadable."""

    exit_code = 2


class DataValidationError(StancewatchError):
    """Input data or configuration violates a documented invariant."""

    exit_code = 3


class NumericalError(StancewatchError):
    """A computation produced non-finite or otherwise invalid numbers."""

    exit_code = 4
