"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and DataError (plus I/O failures)
to exit code 3; everything else is a bug.
"""


class ConfigError(Exception):
    """Invalid configuration, flags, or model parameters supplied by the user."""


class DataError(Exception):
    """Input data cannot be used: unreadable, malformed, or out of contract."""


class SchemaError(DataError):
    """A required column is missing from the input file."""


class EmptyInputError(DataError):
    """The input file contains no data at all."""
