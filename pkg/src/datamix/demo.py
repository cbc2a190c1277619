"""Synthetic end-to-end run: build a dataset, filter, score, sample, check.

The dataset is 100 real and 100 generated episodes of one task. Generated
samples split into an easy tier (tiny prediction error), a hard tier (large
prediction error, a few of them also leaving the joint-limit band) and five
deliberately broken ones that each miss at least one quality threshold. The
run then verifies the point of the whole machine: in the adaptive phase,
hard samples must come out of the plan more often than easy ones by the same
factor the weight table promises, within RATIO_TOLERANCE.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from .binio import (
    file_checksum,
    write_depth,
    write_embeddings,
    write_predictions,
    write_trajectory,
)
from .config import PipelineConfig, load_config
from .errors import DataMixError
from .manifest import DatasetManifest, write_manifest
from .pipeline import run_filter, run_sample, run_score
from .records import (
    ActionChunkPair,
    JointTrajectory,
    PROMPT_COMPONENTS,
    SampleRecord,
    Source,
)
from .sampler import PlanBatch
from .textio import read_plan_text, read_weight_table

N_REAL = 100
N_GENERATED = 100
FRAMES = 30
JOINTS = 6
DT = 0.05
LIMIT = 90.0
EMBED_DIM = 16
GRID = 16
DEPTH_FRAMES = 2

DEMO_TASK = "demo"
TOTAL_STEPS = 2000
SWITCH_STEP = 1000
BATCH_SIZE = 64
RATIO_TOLERANCE = 0.05

# generated-sample tiers by index
EASY = range(0, 45)
HARD = range(45, 95)
BAD = range(95, 100)
OVERLIMIT = range(90, 95)  # hard samples that also leave the limit band

_NOISE = {"easy": 0.02, "hard": 2.0, "real": 0.3, "bad": 0.3}


def tier_of(sample_id: str) -> str | None:
    if sample_id.startswith("real_"):
        return "real"
    if sample_id.startswith("gen_"):
        index = int(sample_id.split("_")[1])
        if index in BAD:
            return "bad"
        return "easy" if index in EASY else "hard"
    return None


def demo_config(seed: int) -> PipelineConfig:
    return load_config(
        overrides={
            "min_mat_pix": 1.0,
            "max_sq_rel": 0.5,
            "min_overall_sim": 0.3,
            "seed": seed,
            "total_steps": TOTAL_STEPS,
            "phase_switch_step": SWITCH_STEP,
            "batch_size": BATCH_SIZE,
        }
    )


def _trajectory(rng: np.random.Generator, overlimit: bool) -> JointTrajectory:
    t = np.arange(FRAMES) * DT
    freq = rng.uniform(0.2, 0.8, size=JOINTS)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=JOINTS)
    amp = rng.uniform(20.0, 60.0, size=JOINTS)
    angles = amp * np.sin(2.0 * np.pi * freq * t[:, None] + phase)
    if overlimit:
        angles[FRAMES // 2, 0] = LIMIT + 30.0
    limits = np.array([[-LIMIT] * JOINTS, [LIMIT] * JOINTS])
    return JointTrajectory(angles=angles, dt=DT, limits=limits)


def _prediction_windows(
    rng: np.random.Generator, traj: JointTrajectory, noise: float
) -> list[ActionChunkPair]:
    reference = np.asarray(traj.angles)
    predicted = reference + noise * rng.standard_normal(reference.shape)
    return [
        ActionChunkPair(
            predicted=predicted,
            reference=reference,
            window_start=0,
            window_len=traj.frames,
        )
    ]


def _depth_gt() -> np.ndarray:
    y, x = np.mgrid[0:GRID, 0:GRID]
    base = 1.0 + (x + y) / (2.0 * GRID)
    return np.stack([base + 0.1 * f for f in range(DEPTH_FRAMES)])


def _depth_pred(gt: np.ndarray, broken: bool) -> np.ndarray:
    if not broken:
        return 1.3 * gt  # pure rescale, absorbed by median alignment
    ripple = 1.0 + 0.9 * np.sin(2.0 * np.pi * np.arange(GRID) / GRID)
    return gt * ripple[None, None, :]


def _views(rng: np.random.Generator, broken: bool) -> tuple[np.ndarray, ...]:
    center = rng.uniform(0.5, 2.0, size=(DEPTH_FRAMES, GRID, GRID))
    if broken:
        left = rng.uniform(0.5, 2.0, size=center.shape)
        right = rng.uniform(0.5, 2.0, size=center.shape)
    else:
        left = center.copy()
        right = center.copy()
    return center, left, right


def _embeddings(broken: bool) -> tuple[np.ndarray, np.ndarray]:
    prompts = np.eye(EMBED_DIM)[: len(PROMPT_COMPONENTS)]
    if broken:
        frame = np.eye(EMBED_DIM)[5]
    else:
        frame = 0.8 * prompts[0] + 0.6 * prompts[1] + 0.5 * prompts[2]
    frames = np.tile(frame, (4, 1))
    return frames, prompts


def build_dataset(root: str | Path, seed: int) -> Path:
    """Write the synthetic dataset and its manifest; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []

    def checksum(rel: str) -> str:
        return file_checksum(root / rel)

    for kind, count in ((Source.GENERATED, N_GENERATED), (Source.REAL, N_REAL)):
        for index in range(count):
            sample_id = f"{'gen' if kind is Source.GENERATED else 'real'}_{index:03d}"
            tier = tier_of(sample_id)
            assert tier is not None
            overlimit = kind is Source.GENERATED and index in OVERLIMIT
            traj = _trajectory(rng, overlimit)
            traj_rel = f"traj_{sample_id}.emtr"
            write_trajectory(root / traj_rel, traj)
            pred_rel = f"pred_{sample_id}.empr"
            write_predictions(
                root / pred_rel, _prediction_windows(rng, traj, _NOISE[tier])
            )
            rec = SampleRecord(
                id=sample_id,
                source=kind,
                task=DEMO_TASK,
                traj_file=traj_rel,
                pred_file=pred_rel,
                checksums={"traj_file": checksum(traj_rel), "pred_file": checksum(pred_rel)},
            )

            if kind is Source.GENERATED:
                bad_depth = index in (95, 98, 99)
                bad_match = index in (96, 98, 99)
                bad_align = index in (97, 99)
                gt = _depth_gt()
                grids = {
                    "gt": gt,
                    "pred": _depth_pred(gt, bad_depth),
                }
                center, left, right = _views(rng, bad_match)
                grids.update({"center": center, "left": left, "right": right})
                for role, grid in grids.items():
                    rel = f"depth_{sample_id}_{role}.emdp"
                    write_depth(root / rel, grid)
                    rec.depth_files[role] = rel
                    rec.checksums[f"depth_{role}"] = checksum(rel)
                frames, prompts = _embeddings(bad_align)
                embed_rel = f"emb_{sample_id}.emem"
                prompt_rel = f"prompt_{sample_id}.emem"
                write_embeddings(root / embed_rel, frames)
                write_embeddings(root / prompt_rel, prompts)
                rec.embed_file = embed_rel
                rec.prompt_embed_file = prompt_rel
                rec.prompt_components = PROMPT_COMPONENTS
                rec.checksums["embed_file"] = checksum(embed_rel)
                rec.checksums["prompt_embed_file"] = checksum(prompt_rel)
            records.append(rec)

    records.sort(key=lambda r: r.id)
    manifest_path = root / "manifest.jsonl"
    write_manifest(
        DatasetManifest(task=DEMO_TASK, version="1", samples=records, base_dir=root),
        manifest_path,
    )
    return manifest_path


def draw_ratio(plan_path: Path, weights_path: Path) -> tuple[float, float]:
    """(measured, predicted) hard-vs-easy per-sample draw frequency ratio.

    Measured counts adaptive-phase draws straight off the plan file; predicted
    comes from the written weight table. Both read artifacts, not in-process
    state, so the check also covers the serialization path.
    """
    _, events = read_plan_text(plan_path)
    counts: dict[str, int] = {}
    for event in events:
        if isinstance(event, PlanBatch) and event.step >= SWITCH_STEP:
            for sample_id in event.ids:
                counts[sample_id] = counts.get(sample_id, 0) + 1

    _, rows = read_weight_table(weights_path)
    weight = {row["id"]: float(row["weight"]) for row in rows}

    def per_sample(tier: str, table: dict, default: float = 0.0) -> float:
        ids = [i for i in weight if tier_of(i) == tier]
        return sum(table.get(i, default) for i in ids) / len(ids)

    measured = per_sample("hard", counts) / per_sample("easy", counts)
    predicted = per_sample("hard", weight) / per_sample("easy", weight)
    return measured, predicted


def run_demo(out_root: str | Path, seed: int) -> dict[str, Any]:
    """Full pipeline over the synthetic dataset; raises if the ratio check fails."""
    out = Path(out_root)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = build_dataset(out / "dataset", seed)
    cfg = demo_config(seed)

    filtered_path, kept, total = run_filter(manifest_path, cfg, out / "quality.jsonl")
    missing = run_score(filtered_path, cfg, out / "scores.jsonl")
    outputs = run_sample(
        filtered_path,
        out / "scores.jsonl",
        cfg,
        range(0, TOTAL_STEPS),
        out_dir=out / "plan",
    )
    measured, predicted = draw_ratio(outputs["plan"], outputs["weights_end"])
    deviation = abs(measured - predicted) / predicted
    if deviation > RATIO_TOLERANCE:
        raise DataMixError(
            f"draw-ratio check failed: measured {measured:.4f} vs "
            f"predicted {predicted:.4f} ({100 * deviation:.2f}% off)"
        )
    return {
        "manifest": manifest_path,
        "filtered_manifest": filtered_path,
        "quality": out / "quality.jsonl",
        "scores": out / "scores.jsonl",
        "missing_predictions": missing,
        "retained_generated": kept,
        "total_generated": total,
        "measured_ratio": measured,
        "predicted_ratio": predicted,
        **outputs,
    }
