"""Exception types shared across the package."""

from __future__ import annotations


class PosebenchError(Exception):
    """Base class for all package errors."""


class DataError(PosebenchError):
    """Input data is missing, malformed or inconsistent."""


class PoseParseError(DataError):
    """Pose JSON could not be decoded.

    ``offset`` is the byte offset into the raw input where decoding failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class StructuralError(DataError):
    """Pose JSON decoded but an object violates the detection layout."""


class IngestError(DataError):
    """Manifest or dataset assembly failure."""


class FeatureError(DataError):
    """A detection cannot be turned into a feature vector."""


class ModelFormatError(DataError):
    """Serialized model payload is unreadable or has an unknown version."""


class InvariantError(PosebenchError):
    """An internal consistency check failed."""
