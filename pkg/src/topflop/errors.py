"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError -> 3, NumericalError -> 4.
Usage errors are handled by click itself (exit 2).
"""


class TopflopError(Exception):
    """Base class for all package-specific failures."""


class DataError(TopflopError):
    """Invalid, inconsistent, or missing input data."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class NumericalError(TopflopError):
    """Non-finite values encountered during optimization or inference."""
