"""Exception types shared across the data engine.

Every error that names a sample carries its id (or file path / line number)
so batch jobs can report exactly which record broke.
"""

from __future__ import annotations


class DataMixError(Exception):
    """Base class for all datamix errors."""


class ConfigError(DataMixError):
    """Bad pipeline configuration (unknown key, invalid value)."""


# --- dataset / manifest ---------------------------------------------------


class MissingFile(DataMixError):
    def __init__(self, path: str, record_id: str | None = None):
        self.path = path
        self.record_id = record_id
        where = f" (record {record_id})" if record_id else ""
        super().__init__(f"referenced file does not exist: {path}{where}")


class ChecksumMismatch(DataMixError):
    def __init__(self, path: str, expected: str, actual: str, record_id: str | None = None):
        self.path = path
        self.expected = expected
        self.actual = actual
        self.record_id = record_id
        where = f" (record {record_id})" if record_id else ""
        super().__init__(f"checksum mismatch for {path}{where}: expected {expected}, got {actual}")


class DuplicateId(DataMixError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate sample id: {record_id}")


class MalformedRecord(DataMixError):
    def __init__(self, detail: str, line: int | None = None, record_id: str | None = None):
        self.detail = detail
        self.line = line
        self.record_id = record_id
        where = []
        if line is not None:
            where.append(f"line {line}")
        if record_id is not None:
            where.append(f"record {record_id}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"malformed record{suffix}: {detail}")


# --- trajectory / metric kernels ------------------------------------------


class OutOfRange(DataMixError):
    """Window request exceeds the trajectory bounds."""


class WindowTooShort(DataMixError):
    """Smoothness needs at least 3 frames to form one second difference."""


class ShapeMismatch(DataMixError):
    """Paired matrices disagree in shape."""


class EmptyInput(DataMixError):
    """An aggregate got an empty list."""


class NonFiniteInput(DataMixError):
    """A value that must be finite is NaN or infinite."""


# --- quality filter --------------------------------------------------------


class NonPositiveDepth(DataMixError):
    """Depth grids must be strictly positive everywhere."""


class MatcherFailure(DataMixError):
    def __init__(self, frame: int, cause: Exception):
        self.frame = frame
        self.cause = cause
        super().__init__(f"matcher failed on frame {frame}: {cause}")


class DimensionMismatch(DataMixError):
    """Embedding vectors disagree in dimensionality."""


class ZeroVector(DataMixError):
    """An embedding with zero norm cannot be normalized."""


class MissingQualityReport(DataMixError):
    def __init__(self, record_id: str, detail: str = "generated sample has no quality report"):
        self.record_id = record_id
        super().__init__(f"{detail}: {record_id}")


# --- sampler ---------------------------------------------------------------


class MissingScore(DataMixError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"retained sample has no performance score: {record_id}")


class EmptyStratum(DataMixError):
    def __init__(self, stratum: str):
        self.stratum = stratum
        super().__init__(f"no retained samples in reachable stratum: {stratum}")


# --- behavior score --------------------------------------------------------


class UnknownEvent(DataMixError):
    def __init__(self, event: str, task: str):
        self.event = event
        self.task = task
        super().__init__(f"event {event!r} is not in the rule table for task {task!r}")


class TaskMismatch(DataMixError):
    def __init__(self, log_task: str, table_task: str):
        super().__init__(f"episode log is for task {log_task!r}, rule table is for {table_task!r}")


# --- streams ---------------------------------------------------------------


class TruncatedStream(DataMixError):
    def __init__(self, offset: int, detail: str = "stream ended mid-frame"):
        self.offset = offset
        super().__init__(f"{detail} at byte offset {offset}")
