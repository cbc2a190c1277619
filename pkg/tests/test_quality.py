"""Depth error, patch matching, prompt alignment, and the zero-weight filter."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from datamix.errors import (
    DimensionMismatch,
    MatcherFailure,
    MissingQualityReport,
    NonPositiveDepth,
    ShapeMismatch,
    ZeroVector,
)
from datamix.quality import (
    FilterConfig,
    apply_filter,
    clip_alignment,
    default_match_tau,
    depth_metrics,
    match_report,
    patch_correspondences,
    pixel_match_count,
)
from datamix.records import (
    AlignmentReport,
    DepthMetrics,
    MatchReport,
    QualityReport,
    SampleRecord,
    Source,
)


class TestDepthMetrics:
    def test_identical_grids(self):
        gt = np.full((2, 4, 4), 2.5)
        m = depth_metrics(gt, gt)
        assert (m.rmse, m.abs_rel, m.sq_rel, m.scale) == (0.0, 0.0, 0.0, 1.0)

    def test_pure_rescale_has_zero_error(self):
        gt = np.linspace(1.0, 3.0, 16).reshape(1, 4, 4)
        m = depth_metrics(2.0 * gt, gt)
        assert m.scale == 0.5
        assert m.rmse == 0.0
        assert m.sq_rel == 0.0

    def test_hand_fixture(self):
        # gt [1, 2, 3], pred [1, 1, 3]: scale 2, residuals [1, 0, 3]
        gt = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 3)
        pred = np.array([1.0, 1.0, 3.0]).reshape(1, 1, 3)
        m = depth_metrics(pred, gt)
        assert m.scale == 2.0
        assert m.rmse == pytest.approx(math.sqrt(10.0 / 3.0), rel=1e-15)
        assert m.abs_rel == pytest.approx(2.0 / 3.0, rel=1e-15)
        assert m.sq_rel == pytest.approx(4.0 / 3.0, rel=1e-15)

    def test_oracle_equivalence(self, rng):
        for _ in range(30):
            shape = (int(rng.integers(1, 4)), int(rng.integers(2, 7)), int(rng.integers(2, 7)))
            gt = rng.uniform(0.5, 5.0, size=shape)
            pred = gt * rng.uniform(0.8, 1.2, size=shape)
            m = depth_metrics(pred, gt)
            rmse, abs_rel, sq_rel, scale = oracles.depth_metrics_loop(
                pred.ravel().tolist(), gt.ravel().tolist()
            )
            assert m.rmse == pytest.approx(rmse, rel=1e-12)
            assert m.abs_rel == pytest.approx(abs_rel, rel=1e-12)
            assert m.sq_rel == pytest.approx(sq_rel, rel=1e-12)
            assert m.scale == pytest.approx(scale, rel=1e-12)

    @given(st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_scale_invariance(self, c, seed):
        gen = np.random.default_rng(seed)
        gt = gen.uniform(0.5, 5.0, size=(1, 5, 5))
        pred = gt * gen.uniform(0.7, 1.3, size=gt.shape)
        base = depth_metrics(pred, gt)
        scaled = depth_metrics(c * pred, gt)
        assert scaled.rmse == pytest.approx(base.rmse, rel=1e-9, abs=1e-12)
        assert scaled.abs_rel == pytest.approx(base.abs_rel, rel=1e-9, abs=1e-12)
        assert scaled.sq_rel == pytest.approx(base.sq_rel, rel=1e-9, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            depth_metrics(np.ones((1, 2, 2)), np.ones((1, 3, 3)))

    def test_nonpositive_pred(self):
        gt = np.ones((1, 2, 2))
        pred = gt.copy()
        pred[0, 0, 0] = 0.0
        with pytest.raises(NonPositiveDepth):
            depth_metrics(pred, gt)

    def test_nonpositive_gt(self):
        pred = np.ones((1, 2, 2))
        gt = pred.copy()
        gt[0, 1, 1] = -1.0
        with pytest.raises(NonPositiveDepth):
            depth_metrics(pred, gt)


class TestPatchMatcher:
    def test_identical_images_all_match(self, rng):
        img = rng.uniform(0.0, 1.0, size=(64, 64))
        hits = patch_correspondences(img, img)
        assert len(hits) == 64
        assert all(offset == left for _, left, offset in hits)

    def test_unrelated_noise_no_match(self, rng):
        a = rng.uniform(0.0, 1.0, size=(32, 32))
        b = rng.uniform(0.0, 1.0, size=(32, 32))
        assert patch_correspondences(a, b) == []

    def test_horizontal_shift_found(self, rng):
        # side view = center shifted left by 8 columns, so the patch at
        # column c reappears at offset c - 8; the c=0 column falls out of frame
        img = rng.uniform(0.0, 1.0, size=(16, 40))
        center = img[:, :32]
        side = img[:, 8:]
        hits = patch_correspondences(center, side)
        assert len(hits) == 6
        assert all(offset == left - 8 for _, left, offset in hits)
        assert all(left >= 8 for _, left, offset in hits)

    def test_deterministic(self, rng):
        a = rng.uniform(0.0, 1.0, size=(24, 24))
        b = a + rng.normal(0, 1e-5, size=a.shape)
        first = patch_correspondences(a, b)
        second = patch_correspondences(a, b)
        assert first == second

    def test_too_small_image(self):
        assert patch_correspondences(np.zeros((4, 4)), np.zeros((4, 4))) == []

    def test_height_mismatch(self):
        with pytest.raises(ShapeMismatch):
            patch_correspondences(np.zeros((16, 16)), np.zeros((8, 16)))

    def test_oracle_count_equivalence(self, rng):
        for _ in range(5):
            center = rng.uniform(0.0, 1.0, size=(16, 24))
            side = center.copy()
            side[:, 12:] = rng.uniform(0.0, 1.0, size=(16, 12))
            got = len(patch_correspondences(center, side))
            want = oracles.match_count_loop(center.tolist(), side.tolist())
            assert got == want

    def test_default_tau_uses_peak(self):
        img = np.ones((8, 8))
        assert default_match_tau(img, img, 8) == pytest.approx(1e-6 * 64)
        assert default_match_tau(10.0 * img, img, 8) == pytest.approx(1e-6 * 64 * 100.0)

    def test_explicit_tau_widens_matches(self, rng):
        a = rng.uniform(0.0, 1.0, size=(16, 16))
        b = a + rng.normal(0, 0.01, size=a.shape)
        strict = patch_correspondences(a, b, tau=1e-12)
        loose = patch_correspondences(a, b, tau=1e6)
        assert len(strict) <= len(loose)
        assert len(loose) == 4


class TestMatcherPlugin:
    def test_failure_wraps_frame_number(self):
        def broken(center, side):
            raise RuntimeError("backend died")

        with pytest.raises(MatcherFailure) as exc:
            pixel_match_count(np.zeros((8, 8)), np.zeros((8, 8)), broken, frame=3)
        assert exc.value.frame == 3

    def test_shape_mismatch_passes_through(self):
        with pytest.raises(ShapeMismatch):
            pixel_match_count(np.zeros((16, 16)), np.zeros((8, 16)))

    def test_match_report_pools_frames(self, rng):
        center = rng.uniform(0.0, 1.0, size=(2, 16, 16))
        rep = match_report(center, center.copy(), center.copy())
        assert rep.counts_left == (4, 4)
        assert rep.counts_right == (4, 4)
        assert rep.mat_pix == 4.0

    def test_custom_matcher_used(self):
        frames = np.zeros((2, 8, 8))
        rep = match_report(frames, frames, frames, matcher=lambda c, s: [(0, 0, 0)] * 7)
        assert rep.mat_pix == 7.0


class TestClipAlignment:
    def test_perfect_alignment(self):
        prompts = np.eye(3)
        frames = np.vstack([prompts[0]] * 4)
        rep = clip_alignment(frames, prompts)
        assert rep.foreground == pytest.approx(1.0)
        assert rep.background == pytest.approx(0.0)
        assert rep.lighting == pytest.approx(0.0)
        assert rep.overall == pytest.approx(1.0 / 3.0)

    def test_component_order_is_row_order(self):
        prompts = np.eye(4)[:3]
        frames = np.atleast_2d(np.eye(4)[2])
        rep = clip_alignment(frames, prompts)
        assert rep.lighting == pytest.approx(1.0)
        assert rep.foreground == pytest.approx(0.0)

    def test_mean_over_frames(self):
        prompts = np.vstack([np.eye(4)[0], np.eye(4)[1], np.eye(4)[2]])
        frames = np.vstack([np.eye(4)[0], np.eye(4)[1]])
        rep = clip_alignment(frames, prompts)
        assert rep.foreground == pytest.approx(0.5)
        assert rep.background == pytest.approx(0.5)

    @given(st.floats(0.01, 1000.0), st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_rescale_invariance(self, c, seed):
        gen = np.random.default_rng(seed)
        frames = gen.normal(size=(3, 8))
        prompts = gen.normal(size=(3, 8))
        base = clip_alignment(frames, prompts)
        scaled = clip_alignment(c * frames, prompts)
        assert scaled.overall == pytest.approx(base.overall, rel=1e-9, abs=1e-12)

    def test_zero_vector_rejected(self):
        frames = np.zeros((1, 4))
        with pytest.raises(ZeroVector):
            clip_alignment(frames, np.eye(3, 4))

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            clip_alignment(np.ones((2, 5)), np.ones((3, 4)))

    def test_wrong_prompt_count(self):
        with pytest.raises(DimensionMismatch):
            clip_alignment(np.ones((2, 4)), np.ones((2, 4)))


def _gen_rec(rec_id: str, quality: QualityReport | None) -> SampleRecord:
    return SampleRecord(
        id=rec_id,
        source=Source.GENERATED,
        task="t",
        traj_file=f"{rec_id}.emtr",
        quality=quality,
    )


def _quality(mat_pix: float = 100.0, sq_rel: float = 0.0, sim: float = 1.0) -> QualityReport:
    n = int(mat_pix)
    return QualityReport(
        depth=DepthMetrics(rmse=0.0, abs_rel=0.0, sq_rel=sq_rel, scale=1.0),
        match=MatchReport(counts_left=(n,), counts_right=(n,)),
        alignment=AlignmentReport(foreground=sim, background=sim, lighting=sim),
    )


class TestFilter:
    CFG = FilterConfig(min_mat_pix=10.0, max_sq_rel=0.5, min_overall_sim=0.3)

    def test_real_samples_untouched(self):
        rec = SampleRecord(id="r", source=Source.REAL, task="t", traj_file="r.emtr")
        out = apply_filter([rec], self.CFG)
        assert out[0] is rec

    def test_passing_sample_keeps_weight_unset(self):
        out = apply_filter([_gen_rec("g", _quality())], self.CFG)
        assert out[0].weight is None
        assert out[0].retained
        assert out[0].quality.verdict == ()

    def test_low_match_count_zeroed(self):
        out = apply_filter([_gen_rec("g", _quality(mat_pix=3.0))], self.CFG)
        assert out[0].weight == 0.0
        assert not out[0].retained
        assert out[0].quality.verdict == ("mat_pix",)

    def test_multiple_failures_all_named(self):
        out = apply_filter([_gen_rec("g", _quality(mat_pix=3.0, sq_rel=2.0, sim=0.0))], self.CFG)
        assert out[0].quality.verdict == ("mat_pix", "sq_rel", "overall_sim")

    def test_threshold_boundaries_pass(self):
        # thresholds are inclusive: exactly-at-limit samples survive
        out = apply_filter(
            [_gen_rec("g", _quality(mat_pix=10.0, sq_rel=0.5, sim=0.3))], self.CFG
        )
        assert out[0].retained

    def test_unenforced_thresholds_ignore_missing_reports(self):
        rec = _gen_rec("g", QualityReport())
        out = apply_filter([rec], FilterConfig())
        assert out[0].retained

    def test_enforced_threshold_requires_report(self):
        rec = _gen_rec("g", QualityReport())
        with pytest.raises(MissingQualityReport):
            apply_filter([rec], self.CFG)

    def test_generated_without_quality_rejected(self):
        with pytest.raises(MissingQualityReport):
            apply_filter([_gen_rec("g", None)], self.CFG)

    def test_idempotent(self):
        recs = [
            _gen_rec("a", _quality()),
            _gen_rec("b", _quality(mat_pix=0.0)),
        ]
        once = apply_filter(recs, self.CFG)
        twice = apply_filter(once, self.CFG)
        assert [(r.id, r.weight, r.quality.verdict) for r in once] == [
            (r.id, r.weight, r.quality.verdict) for r in twice
        ]

    def test_input_not_mutated(self):
        rec = _gen_rec("b", _quality(mat_pix=0.0))
        apply_filter([rec], self.CFG)
        assert rec.weight is None
