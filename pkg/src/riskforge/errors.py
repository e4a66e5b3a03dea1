"""Exception hierarchy shared across the package.

Anything deriving from :class:`UserError` is caused by bad input (files,
configuration, data contents) and maps to CLI exit code 2; everything else
is treated as an internal error (exit code 1).
"""


class RiskforgeError(Exception):
    """Base class for all errors raised by this package."""


class UserError(RiskforgeError):
    """Errors caused by user-supplied input rather than a bug."""


class CsvError(UserError):
    """Malformed or unreadable CSV input."""


class SchemaError(UserError):
    """Column/schema mismatch between tables, pipelines or models."""


class DataError(UserError):
    """Data contents violate an operation's preconditions."""


class ConfigError(UserError):
    """Invalid run configuration."""
