"""Training-loop client for hard-sample-aware batch plans.

Replays the engine's batch plan in exact order with lazy sample payloads,
surfaces weight-refresh points as sentinels the loop must acknowledge, and
writes prediction files the engine can score. Talks to the engine only
through its documented file formats; no shared code.
"""

from .binio import PredictionWindow, TrajectoryData, file_checksum, fnv1a64, read_trajectory
from .client import (
    Batch,
    BatchIterator,
    SamplePayload,
    WeightRefresh,
    iter_batches,
    submit_predictions,
)
from .errors import (
    BatchFeedError,
    ChecksumMismatch,
    DuplicateId,
    MalformedRecord,
    MissingFile,
    RefreshNotAcknowledged,
    TruncatedStream,
)
from .textio import ManifestData, ManifestEntry, cohort_checksum, read_manifest, read_weight_table

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "BatchFeedError",
    "BatchIterator",
    "ChecksumMismatch",
    "DuplicateId",
    "ManifestData",
    "ManifestEntry",
    "MalformedRecord",
    "MissingFile",
    "PredictionWindow",
    "RefreshNotAcknowledged",
    "SamplePayload",
    "TrajectoryData",
    "TruncatedStream",
    "WeightRefresh",
    "cohort_checksum",
    "file_checksum",
    "fnv1a64",
    "iter_batches",
    "read_manifest",
    "read_trajectory",
    "read_weight_table",
    "submit_predictions",
]
