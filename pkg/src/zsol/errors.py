"""Exception types mapped to CLI exit codes."""


class ZsolError(Exception):
    """Base class for pipeline errors."""


class DataError(ZsolError):
    """Unreadable, malformed, or inconsistent input data (exit code 3)."""


class NumericalError(ZsolError):
    """Non-finite values where finite math is required (exit code 4)."""
