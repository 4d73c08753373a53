"""Exception hierarchy shared by every copyspace module."""

from __future__ import annotations


class CopyspaceError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(CopyspaceError, ValueError):
    """An argument violates an operation's precondition."""


class ParseError(CopyspaceError, ValueError):
    """Malformed input text. ``locus`` names the offending line or record."""

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class ValidationError(CopyspaceError, ValueError):
    """Well-formed input that is inconsistent (duplicates, dangling ids)."""


class DecodeError(CopyspaceError, ValueError):
    """Image bytes could not be decoded."""


class EmptyCandidateError(CopyspaceError):
    """No candidate rectangle fits the image under the given parameters."""


class NoCandidatesError(CopyspaceError):
    """Every entry of a parameter sweep came back empty."""


class UndefinedMetricError(CopyspaceError, ArithmeticError):
    """A metric has no defined value (no ground truths, no matches)."""


class GenerationError(CopyspaceError):
    """Synthetic sample placement failed within the attempt budget."""


class StorageError(CopyspaceError, OSError):
    """Output could not be written."""
