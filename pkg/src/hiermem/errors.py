"""Exception types shared across the engine."""

from __future__ import annotations

__all__ = [
    "HiermemError",
    "InvalidArgumentError",
    "NotFoundError",
    "ProviderUnavailableError",
    "ConfigError",
    "SnapshotError",
    "SnapshotParseError",
    "SnapshotVersionError",
    "SnapshotCorruptionError",
    "TranscriptError",
]


class HiermemError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(HiermemError):
    """A caller-supplied value violates an operation precondition."""


class NotFoundError(HiermemError):
    """A referenced entity (segment, user, snapshot) does not exist."""


class ProviderUnavailableError(HiermemError):
    """The language-model/embedding provider failed or timed out."""


class ConfigError(HiermemError):
    """A configuration value is out of range or unknown.

    Attributes:
        field: Name of the offending configuration field.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class SnapshotError(HiermemError):
    """Base class for persistence failures."""


class SnapshotParseError(SnapshotError):
    """Snapshot bytes are not valid JSON; message carries the location."""


class SnapshotVersionError(SnapshotError):
    """Snapshot format version is not supported by this build."""


class SnapshotCorruptionError(SnapshotError):
    """Snapshot parsed but violates a tier invariant; message names it."""


class TranscriptError(HiermemError):
    """A transcript line is malformed.

    Attributes:
        line_no: 1-based line number in the source file, when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
