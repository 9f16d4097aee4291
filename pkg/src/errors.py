"""
Exception hierarchy for GeoGlimpse.

Validation problems subclass ValueError so callers that only know about the
standard library still catch them.
"""
from typing import Optional


class GeoGlimpseError(Exception):
    """Base class for every error raised by the package."""


class ConfigValidationError(GeoGlimpseError, ValueError):
    """A configuration document or one of its sections is invalid."""


class WorldGenerationError(GeoGlimpseError):
    """The world spec cannot be realized (e.g. buildings leave no room for paths)."""


class PoseInWallError(GeoGlimpseError, ValueError):
    """A camera pose lies inside an occupied map cell."""


# ========================================
# DATASET CONTAINER
# ========================================

class DatasetFormatError(GeoGlimpseError):
    """Base class for binary dataset decoding failures."""


class BadMagicError(DatasetFormatError):
    def __init__(self, found: bytes, expected: bytes):
        super().__init__(f"Not a dataset file: magic {found!r}, expected {expected!r}")
        self.found = found
        self.expected = expected


class UnsupportedVersionError(DatasetFormatError):
    def __init__(self, found: int, supported: int):
        super().__init__(f"Unsupported dataset version {found} (this build reads version {supported})")
        self.found = found
        self.supported = supported


class TruncatedDatasetError(DatasetFormatError):
    def __init__(self, expected_bytes: int, actual_bytes: int, what: str = "file"):
        super().__init__(
            f"Truncated dataset {what}: expected {expected_bytes} bytes, got {actual_bytes}"
        )
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes


class RecordCountMismatchError(DatasetFormatError):
    def __init__(self, header_count: int, body_count: int):
        super().__init__(
            f"Header declares {header_count} records but the body holds {body_count}"
        )
        self.header_count = header_count
        self.body_count = body_count


class CheckpointFormatError(GeoGlimpseError):
    """A checkpoint file is malformed or does not match its configuration."""


# ========================================
# TRAINING / INFERENCE / EVALUATION
# ========================================

class NonFiniteLossError(GeoGlimpseError):
    def __init__(self, term: str, step: int, value: Optional[float] = None):
        super().__init__(f"Non-finite {term} loss ({value}) at step {step}")
        self.term = term
        self.step = step
        self.value = value


class NonMonotonicTimestampError(GeoGlimpseError, ValueError):
    def __init__(self, timestamp: float, last_timestamp: float):
        super().__init__(
            f"Frame timestamp {timestamp:.3f}s is not after the previous frame ({last_timestamp:.3f}s)"
        )
        self.timestamp = timestamp
        self.last_timestamp = last_timestamp


class EmptyTraceError(GeoGlimpseError, ValueError):
    """A metric was requested on a trace with no usable entries."""
