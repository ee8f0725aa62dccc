"""Exception hierarchy shared across the toolkit.

The split mirrors the CLI exit-code policy: usage/config problems,
bad input data, and numeric failures are reported differently.
"""


class FreqconnError(Exception):
    """Base class for all toolkit errors."""


class UsageError(FreqconnError):
    """Invalid configuration or misuse of an interface (exit code 1)."""


class DataError(FreqconnError):
    """Malformed, inconsistent, or insufficient input data (exit code 2)."""


class NumericError(FreqconnError):
    """Numeric failure: instability, rank deficiency, degenerate denominators
    (exit code 3)."""
