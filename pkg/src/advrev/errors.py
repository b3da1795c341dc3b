"""Exception types shared across the toolkit.

The CLI maps ToolError subclasses to exit code 2 (bad usage or bad input);
anything else is an internal error (exit code 1).
"""


class ToolError(Exception):
    """Base class for errors caused by invalid usage or invalid input data."""


class UsageError(ToolError):
    """Arguments or configuration violate a precondition."""


class FormatError(ToolError):
    """A file does not conform to its documented layout or version."""
