"""Quality scoring for generated episodes, and the zero-weight filter.

Three signals per generated sample: scale-invariant depth error against a
reference depth stream, patch-match counts between the center view and each
side view, and embedding similarity against the three prompt components.
Samples that miss any configured threshold get sampling weight 0 and stay in
the manifest; real samples are never touched.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .errors import (
    DimensionMismatch,
    MatcherFailure,
    MissingQualityReport,
    NonPositiveDepth,
    ShapeMismatch,
    ZeroVector,
)
from .records import (
    PROMPT_COMPONENTS,
    AlignmentReport,
    DepthMetrics,
    MatchReport,
    QualityReport,
    SampleRecord,
    Source,
)

DEFAULT_PATCH = 8
DEFAULT_STRIDE = 8

# a matcher maps (center, side) image grids to a list of correspondences
Matcher = Callable[[np.ndarray, np.ndarray], Sequence[tuple]]


def depth_metrics(pred: np.ndarray, gt: np.ndarray) -> DepthMetrics:
    """Median-aligned depth errors over all pixels of all frames.

    The scale median(gt)/median(pred) is applied to pred first, which makes
    the result invariant to any positive rescaling of pred.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    for name, grid in (("pred", pred), ("gt", gt)):
        if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
            raise NonPositiveDepth(f"{name} grid contains non-positive or non-finite values")
    scale = float(np.median(gt) / np.median(pred))
    diff = scale * pred - gt
    rmse = float(np.sqrt(np.mean(diff * diff)))
    abs_rel = float(np.mean(np.abs(diff) / gt))
    sq_rel = float(np.mean(diff * diff / gt))
    return DepthMetrics(rmse=rmse, abs_rel=abs_rel, sq_rel=sq_rel, scale=scale)


def default_match_tau(center: np.ndarray, side: np.ndarray, patch: int) -> float:
    # 1e-6 of a patch's worst-case squared-difference mass; peak intensity
    # floors at 1 so [0,1] images get a fixed threshold
    peak = max(1.0, float(np.max(np.abs(center))), float(np.max(np.abs(side))))
    return 1e-6 * patch * patch * peak * peak


def patch_correspondences(
    center: np.ndarray,
    side: np.ndarray,
    patch: int = DEFAULT_PATCH,
    stride: int = DEFAULT_STRIDE,
    tau: float | None = None,
) -> list[tuple[int, int, int]]:
    """Match fixed patches of `center` against every horizontal offset of `side`.

    Returns (top, left, best_offset) for each patch on the stride grid whose
    best sum-of-squared-differences is at most tau. Exhaustive and exact, so
    repeated calls are identical.
    """
    center = np.ascontiguousarray(center, dtype=np.float64)
    side = np.ascontiguousarray(side, dtype=np.float64)
    if center.ndim != 2 or side.ndim != 2:
        raise ShapeMismatch("images must be 2-d grids")
    if center.shape[0] != side.shape[0]:
        raise ShapeMismatch(f"image heights differ: {center.shape[0]} vs {side.shape[0]}")
    if tau is None:
        tau = default_match_tau(center, side, patch)

    height, width = center.shape
    n_rows = (height - patch) // stride + 1 if height >= patch else 0
    n_cols = (width - patch) // stride + 1 if width >= patch else 0
    n_offsets = side.shape[1] - patch + 1
    if n_rows == 0 or n_cols == 0 or n_offsets < 1:
        return []

    sr, sc = center.strides
    patches = as_strided(
        center,
        shape=(n_rows, n_cols, patch, patch),
        strides=(sr * stride, sc * stride, sr, sc),
    )
    tr, tc = side.strides
    windows = as_strided(
        side,
        shape=(n_rows, n_offsets, patch, patch),
        strides=(tr * stride, tc, tr, tc),
    )

    # ssd[r, c, o] = sum((patches[r,c] - windows[r,o])^2), expanded to avoid
    # materializing the 5-d difference
    p_sq = np.einsum("rcab,rcab->rc", patches, patches)
    w_sq = np.einsum("roab,roab->ro", windows, windows)
    cross = np.einsum("rcab,roab->rco", patches, windows)
    ssd = p_sq[:, :, None] + w_sq[:, None, :] - 2.0 * cross

    best_offset = np.argmin(ssd, axis=2)
    best = np.take_along_axis(ssd, best_offset[:, :, None], axis=2)[:, :, 0]
    hits = np.argwhere(best <= tau)
    return [
        (int(r) * stride, int(c) * stride, int(best_offset[r, c])) for r, c in hits
    ]


def pixel_match_count(
    center: np.ndarray,
    side: np.ndarray,
    matcher: Matcher | None = None,
    frame: int = 0,
) -> int:
    """Correspondence count for one frame pair; plugin errors carry the frame."""
    if matcher is None:
        matcher = patch_correspondences
    try:
        return len(matcher(center, side))
    except ShapeMismatch:
        raise
    except Exception as exc:
        raise MatcherFailure(frame, exc) from exc


def match_report(
    center_frames: np.ndarray,
    left_frames: np.ndarray,
    right_frames: np.ndarray,
    matcher: Matcher | None = None,
) -> MatchReport:
    counts_left = tuple(
        pixel_match_count(c, s, matcher, frame=k)
        for k, (c, s) in enumerate(zip(center_frames, left_frames))
    )
    counts_right = tuple(
        pixel_match_count(c, s, matcher, frame=k)
        for k, (c, s) in enumerate(zip(center_frames, right_frames))
    )
    return MatchReport(counts_left=counts_left, counts_right=counts_right)


def _unit_rows(vectors: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        bad = int(np.argmax(norms == 0.0))
        raise ZeroVector(f"{what} vector {bad} has zero norm")
    return vectors / norms[:, None]


def clip_alignment(frame_embeddings: np.ndarray, prompt_embeddings: np.ndarray) -> AlignmentReport:
    """Mean cosine similarity of every frame against each prompt component.

    prompt_embeddings rows follow PROMPT_COMPONENTS order. Inputs are
    normalized here, so any positive rescaling of a vector is a no-op.
    """
    frames = np.atleast_2d(np.asarray(frame_embeddings, dtype=np.float64))
    prompts = np.atleast_2d(np.asarray(prompt_embeddings, dtype=np.float64))
    if prompts.shape[0] != len(PROMPT_COMPONENTS):
        raise DimensionMismatch(
            f"need {len(PROMPT_COMPONENTS)} prompt vectors, got {prompts.shape[0]}"
        )
    if frames.shape[1] != prompts.shape[1]:
        raise DimensionMismatch(
            f"embedding dims differ: frames {frames.shape[1]} vs prompts {prompts.shape[1]}"
        )
    sims = _unit_rows(frames, "frame") @ _unit_rows(prompts, "prompt").T
    fg, bg, light = (float(m) for m in sims.mean(axis=0))
    return AlignmentReport(foreground=fg, background=bg, lighting=light)


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds; any left as None is simply not enforced."""

    min_mat_pix: float | None = None
    max_sq_rel: float | None = None
    min_overall_sim: float | None = None

    def __post_init__(self) -> None:
        for name in ("min_mat_pix", "max_sq_rel", "min_overall_sim"):
            value = getattr(self, name)
            if value is not None and not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")


def _failed_criteria(report: QualityReport, cfg: FilterConfig, rec_id: str) -> list[str]:
    failed = []
    if cfg.min_mat_pix is not None:
        if report.match is None:
            raise MissingQualityReport(rec_id)
        if report.match.mat_pix < cfg.min_mat_pix:
            failed.append("mat_pix")
    if cfg.max_sq_rel is not None:
        if report.depth is None:
            raise MissingQualityReport(rec_id)
        if report.depth.sq_rel > cfg.max_sq_rel:
            failed.append("sq_rel")
    if cfg.min_overall_sim is not None:
        if report.alignment is None:
            raise MissingQualityReport(rec_id)
        if report.alignment.overall < cfg.min_overall_sim:
            failed.append("overall_sim")
    return failed


def apply_filter(samples: list[SampleRecord], cfg: FilterConfig) -> list[SampleRecord]:
    """Zero the weight of generated samples that miss any configured threshold.

    Real samples come back unchanged. Passing samples keep whatever weight
    they had (the sampler assigns real weights later). Idempotent under a
    fixed config.
    """
    out = []
    for rec in samples:
        if rec.source is Source.REAL:
            out.append(rec)
            continue
        if rec.quality is None:
            raise MissingQualityReport(rec.id)
        failed = _failed_criteria(rec.quality, cfg, rec.id)
        quality = dataclasses.replace(rec.quality, verdict=tuple(failed))
        if failed:
            out.append(rec.replace(quality=quality, weight=0.0))
        else:
            out.append(rec.replace(quality=quality))
    return out
