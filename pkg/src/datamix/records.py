"""Canonical in-memory dataset model: trajectories, prediction windows, samples.

Angles are stored in degrees throughout; unit conversion happens only at
display boundaries. Loaded arrays are marked read-only so records can be
shared safely across threads after validation.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfRange

# Canonical role order for per-view / per-purpose depth grids in a manifest.
DEPTH_ROLES = ("pred", "gt", "center", "left", "right")

# Canonical order of prompt components for text alignment scoring.
PROMPT_COMPONENTS = ("foreground", "background", "lighting")


class Source(enum.Enum):
    REAL = "real"
    GENERATED = "generated"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class JointTrajectory:
    """Time-indexed joint angles for one episode.

    Attributes:
        angles: (frames, joints) matrix of joint angles in degrees.
        dt: seconds between consecutive frames.
        limits: (2, joints) matrix; row 0 = lower bounds, row 1 = upper bounds.
    """

    angles: np.ndarray
    dt: float
    limits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "angles", _freeze(np.atleast_2d(self.angles)))
        object.__setattr__(self, "limits", _freeze(np.atleast_2d(self.limits)))

    @property
    def frames(self) -> int:
        return self.angles.shape[0]

    @property
    def joints(self) -> int:
        return self.angles.shape[1]

    @property
    def duration(self) -> float:
        """Episode length in seconds: (frames - 1) * dt."""
        return (self.frames - 1) * self.dt


def validate_trajectory(traj: JointTrajectory) -> list[str]:
    """Check every trajectory invariant; each violation names its coordinates.

    Returns an empty list iff the trajectory is valid. Violations are data,
    not exceptions: loaders decide whether to raise.
    """
    violations: list[str] = []
    if traj.frames < 1:
        violations.append("frames must be >= 1")
    if traj.joints < 1:
        violations.append("joints must be >= 1")
    if not (isinstance(traj.dt, (int, float)) and math.isfinite(traj.dt) and traj.dt > 0):
        violations.append("dt must be > 0")
    if traj.limits.shape != (2, traj.joints):
        violations.append(
            f"limits must have shape (2, {traj.joints}), got {traj.limits.shape}"
        )
    else:
        bad = np.nonzero(~(traj.limits[0] < traj.limits[1]))[0]
        for j in bad:
            violations.append(
                f"limit lower must be < upper for joint {j}: "
                f"({traj.limits[0, j]}, {traj.limits[1, j]})"
            )
        if not np.all(np.isfinite(traj.limits)):
            violations.append("limits contain non-finite values")
    nonfinite = np.argwhere(~np.isfinite(traj.angles))
    for k, j in nonfinite:
        violations.append(f"angle at (frame {k}, joint {j}) is non-finite")
    return violations


def window(traj: JointTrajectory, start: int, length: int) -> np.ndarray:
    """Contiguous (length, joints) slice of the angle matrix.

    Tail windows shorter than the policy chunk length are fine; callers pass
    length = min(L, frames - start). Raises OutOfRange when the request does
    not fit.
    """
    if start < 0 or length < 0 or start + length > traj.frames:
        raise OutOfRange(
            f"window [{start}, {start + length}) does not fit in {traj.frames} frames"
        )
    return traj.angles[start : start + length]


@dataclass(frozen=True)
class ActionChunkPair:
    """Predicted vs reference action chunk over one evaluation window."""

    predicted: np.ndarray  # (window_len, joints) degrees
    reference: np.ndarray  # (window_len, joints) degrees
    window_start: int
    window_len: int

    def __post_init__(self):
        object.__setattr__(self, "predicted", _freeze(np.atleast_2d(self.predicted)))
        object.__setattr__(self, "reference", _freeze(np.atleast_2d(self.reference)))

    def validate(self, traj_frames: int | None = None) -> list[str]:
        violations = []
        if self.predicted.shape != self.reference.shape:
            violations.append(
                f"predicted {self.predicted.shape} and reference "
                f"{self.reference.shape} differ in shape"
            )
        if self.window_len < 1:
            violations.append("window_len must be >= 1")
        if self.predicted.shape[0] != self.window_len:
            violations.append(
                f"matrix rows {self.predicted.shape[0]} != window_len {self.window_len}"
            )
        if traj_frames is not None and self.window_start + self.window_len > traj_frames:
            violations.append(
                f"window [{self.window_start}, {self.window_start + self.window_len}) "
                f"exceeds trajectory length {traj_frames}"
            )
        return violations


@dataclass(frozen=True)
class DepthMetrics:
    """Scale-aligned depth errors between a predicted and reference grid."""

    rmse: float
    abs_rel: float
    sq_rel: float
    scale: float


@dataclass(frozen=True)
class MatchReport:
    """Per-frame pixel match counts for the center-left / center-right pairs."""

    counts_left: tuple[int, ...]
    counts_right: tuple[int, ...]

    @property
    def mat_pix(self) -> float:
        """Mean match count pooled over all frames and both view pairs."""
        pooled = self.counts_left + self.counts_right
        return sum(pooled) / len(pooled)


@dataclass(frozen=True)
class AlignmentReport:
    """Prompt-component similarities averaged over frames and views."""

    foreground: float
    background: float
    lighting: float

    @property
    def overall(self) -> float:
        return (self.foreground + self.background + self.lighting) / 3.0


@dataclass(frozen=True)
class QualityReport:
    """Everything the filter knows about one generated episode.

    ``verdict`` lists the names of failed criteria; empty means PASS. Metric
    families a sample has no inputs for stay None.
    """

    depth: DepthMetrics | None = None
    match: MatchReport | None = None
    alignment: AlignmentReport | None = None
    verdict: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.verdict


@dataclass
class SampleRecord:
    """One demonstration episode plus its pipeline state.

    File references are paths relative to the manifest's directory; bulk
    payloads (angles, depth grids, embeddings) stay on disk until needed.
    ``weight == 0`` means the sample was filtered out or explicitly zeroed.
    """

    id: str
    source: Source
    task: str
    traj_file: str
    pred_file: str | None = None
    depth_files: dict[str, str] = field(default_factory=dict)
    embed_file: str | None = None
    prompt_embed_file: str | None = None
    prompt_components: tuple[str, ...] = PROMPT_COMPONENTS
    checksums: dict[str, str] = field(default_factory=dict)
    quality: QualityReport | None = None
    score: float | None = None
    weight: float | None = None

    @property
    def retained(self) -> bool:
        """A sample is retained unless its weight was explicitly zeroed."""
        return self.weight != 0.0

    def validate(self) -> list[str]:
        violations = []
        if not self.id:
            violations.append("id must be non-empty")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            violations.append(f"score {self.score} outside [0, 1]")
        if self.weight is not None and not (0.0 <= self.weight <= 1.0):
            violations.append(f"weight {self.weight} outside [0, 1]")
        for role in self.depth_files:
            if role not in DEPTH_ROLES:
                violations.append(f"unknown depth role {role!r}")
        return violations

    def replace(self, **changes) -> "SampleRecord":
        return dataclasses.replace(self, **changes)
