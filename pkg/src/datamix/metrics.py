"""Per-sample trajectory performance scores and the execution report.

Three raw channels per sample, all oriented so that higher means the policy
did better on it:

    mse     -(1/L) sum_t ||predicted_t - reference_t||^2 over a prediction
            window; a sample with several windows takes the mean
    smooth  -sum over consecutive frame triples and joints of
            |second difference| / dt^2 (full trajectory by default)
    limit   1 if every angle stays inside its joint's inclusive limit band,
            else 0

Each channel is min-max normalized over the scoring cohort and the unified
score is the plain mean of the three. The execution report reuses the
smoothness kernel: mean angular acceleration is -smooth / (triples * joints).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, NonFiniteInput, ShapeMismatch, WindowTooShort
from .records import ActionChunkPair, JointTrajectory, window

SMOOTHNESS_MODES = ("full", "window")


@dataclass(frozen=True)
class RawScores:
    mse: float  # <= 0
    smooth: float  # <= 0
    limit: int  # 0 or 1


@dataclass(frozen=True)
class NormalizedScores:
    mse_n: float
    smooth_n: float
    limit_n: float

    @property
    def fused(self) -> float:
        return (self.mse_n + self.smooth_n + self.limit_n) / 3.0


@dataclass(frozen=True)
class ExecutionReport:
    duration: float  # seconds, (frames - 1) * dt
    mean_ang_accel: float | None  # deg/s^2; None when frames < 3
    overlimit_frames: int


def action_mse_score(pair: ActionChunkPair) -> float:
    if pair.predicted.shape != pair.reference.shape:
        raise ShapeMismatch(
            f"predicted {pair.predicted.shape} vs reference {pair.reference.shape}"
        )
    diff = pair.predicted - pair.reference
    return float(-np.einsum("tj,tj->", diff, diff) / diff.shape[0])


def smoothness_score(traj: JointTrajectory, start: int, length: int) -> float:
    """Negated absolute second-difference mass over the window, in deg/s^2."""
    if length < 3:
        raise WindowTooShort(f"smoothness needs >= 3 frames, window has {length}")
    w = window(traj, start, length)
    second = w[2:] - 2.0 * w[1:-1] + w[:-2]
    return float(-np.sum(np.abs(second)) / (traj.dt * traj.dt))


def joint_limit_score(traj: JointTrajectory, start: int, length: int) -> int:
    """1 iff the window stays inside the inclusive per-joint limit bands."""
    w = window(traj, start, length)
    lower, upper = traj.limits
    return int(np.all((w >= lower) & (w <= upper)))


def minmax_normalize(values: list[float]) -> list[float]:
    if len(values) == 0:
        raise EmptyInput("cannot normalize an empty cohort")
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("cohort contains non-finite values")
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        # degenerate cohort: neutral midpoint rather than branding everything
        # maximally easy or hard
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in map(float, values)]


def unified_scores(raw: list[RawScores]) -> list[NormalizedScores]:
    """Normalize each channel over the cohort, then fuse as the exact mean."""
    mse_n = minmax_normalize([r.mse for r in raw])
    smooth_n = minmax_normalize([r.smooth for r in raw])
    limit_n = minmax_normalize([float(r.limit) for r in raw])
    return [
        NormalizedScores(mse_n=m, smooth_n=s, limit_n=l)
        for m, s, l in zip(mse_n, smooth_n, limit_n)
    ]


def sample_raw_scores(
    traj: JointTrajectory,
    windows: list[ActionChunkPair],
    smoothness: str = "full",
) -> RawScores:
    """Aggregate one sample's channels from its trajectory and prediction windows.

    mse is the mean of action_mse_score over the windows. smooth covers the
    full trajectory in "full" mode; in "window" mode it is the mean over the
    prediction windows long enough to carry a second difference. limit always
    covers the full trajectory.
    """
    if smoothness not in SMOOTHNESS_MODES:
        raise ValueError(f"smoothness must be one of {SMOOTHNESS_MODES}")
    if not windows:
        raise EmptyInput("sample has no prediction windows")
    mse = float(np.mean([action_mse_score(p) for p in windows]))
    if smoothness == "full":
        smooth = smoothness_score(traj, 0, traj.frames)
    else:
        eligible = [p for p in windows if p.window_len >= 3]
        if not eligible:
            raise WindowTooShort("no prediction window has >= 3 frames")
        smooth = float(
            np.mean([smoothness_score(traj, p.window_start, p.window_len) for p in eligible])
        )
    limit = joint_limit_score(traj, 0, traj.frames)
    return RawScores(mse=mse, smooth=smooth, limit=limit)


def execution_report(traj: JointTrajectory) -> ExecutionReport:
    duration = (traj.frames - 1) * traj.dt
    lower, upper = traj.limits
    out_of_band = (traj.angles < lower) | (traj.angles > upper)
    overlimit = int(np.any(out_of_band, axis=1).sum())
    triples = traj.frames - 2
    if triples < 1:
        return ExecutionReport(duration=duration, mean_ang_accel=None, overlimit_frames=overlimit)
    accel = -smoothness_score(traj, 0, traj.frames) / (triples * traj.joints)
    return ExecutionReport(duration=duration, mean_ang_accel=accel, overlimit_frames=overlimit)
