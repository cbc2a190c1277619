"""Client-side failures.

Every error names the position it hit (record id, line number, or byte
offset) so a stalled training run points straight at the broken artifact.
"""

from __future__ import annotations


class BatchFeedError(Exception):
    """Base class for all batchfeed errors."""


class MissingFile(BatchFeedError):
    def __init__(self, path: str, record_id: str | None = None):
        self.path = path
        self.record_id = record_id
        where = f" (record {record_id})" if record_id else ""
        super().__init__(f"referenced file does not exist: {path}{where}")


class ChecksumMismatch(BatchFeedError):
    def __init__(self, what: str, expected: str, actual: str, record_id: str | None = None):
        self.what = what
        self.expected = expected
        self.actual = actual
        self.record_id = record_id
        where = f" (record {record_id})" if record_id else ""
        super().__init__(f"checksum mismatch for {what}{where}: expected {expected}, got {actual}")


class DuplicateId(BatchFeedError):
    def __init__(self, record_id: str):
        self.record_id = record_id
        super().__init__(f"duplicate sample id: {record_id}")


class MalformedRecord(BatchFeedError):
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


class TruncatedStream(BatchFeedError):
    def __init__(self, offset: int, detail: str = "stream ended mid-frame"):
        self.offset = offset
        super().__init__(f"{detail} at byte offset {offset}")


class RefreshNotAcknowledged(BatchFeedError):
    """The loop tried to advance past a weight refresh without acknowledging it."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(
            f"refresh at step {step} not acknowledged; call acknowledge() "
            f"after reloading weights"
        )
