"""Shared exception types.

Most argument/shape problems raise plain ValueError; the types below exist
where callers (mainly the CLI) need to distinguish failure classes.
"""


class SplitOverlapError(ValueError):
    """A train/validation split shares at least one subject id."""


class NonFiniteError(RuntimeError):
    """A numerical operation produced NaN or Inf."""
