"""Command implementations: filter, score, sample, eval, exec.

The CLI and the synthetic demo both call these, so a demo run produces the
exact artifacts a CLI run over the same inputs would. Commands never mutate
their input manifest; the filter writes its updated copy beside the original
with a .filtered infix.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np

from .behavior import builtin_rule_table, load_episode_logs, score_episode, aggregate
from .binio import read_depth, read_embeddings, read_predictions, read_trajectory
from .config import PipelineConfig
from .errors import ConfigError, DataMixError, EmptyInput, WindowTooShort
from .manifest import DatasetManifest, load_manifest, write_manifest
from .metrics import (
    execution_report,
    joint_limit_score,
    sample_raw_scores,
    smoothness_score,
    unified_scores,
)
from .quality import apply_filter, clip_alignment, depth_metrics, match_report
from .records import PROMPT_COMPONENTS, QualityReport, SampleRecord, Source
from .sampler import Phase, compute_weights, emit_epoch_plan, phase_schedule
from .textio import (
    ScoreRow,
    parse_score_file,
    plan_header,
    write_plan_binary,
    write_plan_text,
    write_quality_report,
    write_score_file,
    write_weight_table,
)

FILTERED_INFIX = ".filtered"


def filtered_manifest_path(manifest_path: str | Path) -> Path:
    p = Path(manifest_path)
    return p.with_name(p.stem + FILTERED_INFIX + p.suffix)


def _quality_for(manifest: DatasetManifest, rec: SampleRecord) -> QualityReport:
    """Compute whichever quality signals this record has sidecar inputs for."""
    depth = match = alignment = None
    files = rec.depth_files
    if "pred" in files and "gt" in files:
        depth = depth_metrics(
            read_depth(manifest.resolve(files["pred"])),
            read_depth(manifest.resolve(files["gt"])),
        )
    if all(role in files for role in ("center", "left", "right")):
        match = match_report(
            read_depth(manifest.resolve(files["center"])),
            read_depth(manifest.resolve(files["left"])),
            read_depth(manifest.resolve(files["right"])),
        )
    if rec.embed_file and rec.prompt_embed_file and rec.prompt_components:
        frames = read_embeddings(manifest.resolve(rec.embed_file))
        prompts = read_embeddings(manifest.resolve(rec.prompt_embed_file))
        by_component = dict(zip(rec.prompt_components, prompts))
        ordered = np.stack([by_component[c] for c in PROMPT_COMPONENTS])
        alignment = clip_alignment(frames, ordered)
    return QualityReport(depth=depth, match=match, alignment=alignment, verdict=())


def run_filter(
    manifest_path: str | Path,
    cfg: PipelineConfig,
    report_path: str | Path,
) -> tuple[Path, int, int]:
    """Score and filter generated samples.

    Returns (updated manifest path, retained generated, total generated).
    """
    manifest = load_manifest(manifest_path)
    scored = []
    for rec in manifest.samples:
        if rec.source is Source.GENERATED:
            rec = rec.replace(quality=_quality_for(manifest, rec))
        scored.append(rec)
    filtered = apply_filter(scored, cfg.filter_config())
    write_quality_report(filtered, report_path)

    out_path = filtered_manifest_path(manifest_path)
    write_manifest(
        DatasetManifest(
            task=manifest.task,
            version=manifest.version,
            samples=filtered,
            base_dir=manifest.base_dir,
        ),
        out_path,
    )
    generated = [r for r in filtered if r.source is Source.GENERATED]
    retained = sum(1 for r in generated if r.retained)
    return out_path, retained, len(generated)


def run_score(
    manifest_path: str | Path,
    cfg: PipelineConfig,
    out_path: str | Path,
) -> list[str]:
    """Score retained samples; returns ids that had no predictions to score."""
    manifest = load_manifest(manifest_path)
    retained = [r for r in manifest.samples if r.retained]

    scored: list[tuple[SampleRecord, Any]] = []
    partial: list[tuple[SampleRecord, float, int]] = []
    for rec in retained:
        traj = read_trajectory(manifest.resolve(rec.traj_file))
        if rec.pred_file is not None:
            windows = read_predictions(manifest.resolve(rec.pred_file), traj.joints)
            for pair in windows:
                pair.validate(traj.frames)
            scored.append((rec, sample_raw_scores(traj, windows, cfg.smoothness)))
        else:
            if traj.frames >= 3:
                smooth = smoothness_score(traj, 0, traj.frames)
            else:
                smooth = 0.0  # no frame triple exists, the penalty sum is empty
            partial.append((rec, smooth, joint_limit_score(traj, 0, traj.frames)))

    if not scored:
        raise EmptyInput("no retained sample has predictions to score")
    normalized = unified_scores([raw for _, raw in scored])

    rows = [
        ScoreRow(
            id=rec.id,
            r_mse=raw.mse,
            r_smooth=raw.smooth,
            r_limit=raw.limit,
            mse_n=norm.mse_n,
            smooth_n=norm.smooth_n,
            limit_n=norm.limit_n,
            s=norm.fused,
        )
        for (rec, raw), norm in zip(scored, normalized)
    ]
    rows.extend(
        ScoreRow(id=rec.id, r_mse=None, r_smooth=smooth, r_limit=limit)
        for rec, smooth, limit in partial
    )
    rows.sort(key=lambda r: r.id)
    write_score_file(rows, out_path)
    return sorted(rec.id for rec, _, _ in partial)


def needed_phases(cfg: PipelineConfig, steps: range) -> set[Phase]:
    scfg = cfg.sampler_config()
    return {phase_schedule(s, scfg) for s in (steps.start, steps.stop - 1)}


def run_sample(
    manifest_path: str | Path,
    scores_path: str | Path | None,
    cfg: PipelineConfig,
    steps: range,
    out_dir: str | Path | None = None,
    binary_stream: BinaryIO | None = None,
) -> dict[str, Path]:
    """Weight tables plus the batch plan for `steps`.

    Writes weights_start/weights_end for the phases in force at the range's
    two ends (identical files when no switch is crossed) and the plan as text
    into out_dir, or as binary frames onto the given stream.
    """
    if len(steps) == 0:
        raise ConfigError("empty step range")
    manifest = load_manifest(manifest_path)
    scfg = cfg.sampler_config()

    samples = manifest.samples
    phases = needed_phases(cfg, steps)
    if Phase.ADAPTIVE in phases:
        if scores_path is None:
            raise ConfigError("adaptive steps requested but no score file given")
        score_rows = parse_score_file(scores_path)
        for rec in samples:
            row = score_rows.get(rec.id)
            if row is not None and row.s is not None:
                rec.score = row.s

    tables = {phase: compute_weights(samples, scfg, phase) for phase in phases}
    start_phase = phase_schedule(steps.start, scfg)
    end_phase = phase_schedule(steps.stop - 1, scfg)

    outputs: dict[str, Path] = {}
    events = emit_epoch_plan(scfg, tables, steps)
    header = plan_header(manifest.cohort_checksum, steps, scfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        outputs["weights_start"] = out / "weights_start.jsonl"
        outputs["weights_end"] = out / "weights_end.jsonl"
        write_weight_table(tables[start_phase], outputs["weights_start"])
        write_weight_table(tables[end_phase], outputs["weights_end"])
        outputs["plan"] = out / "plan.jsonl"
        with open(outputs["plan"], "w", encoding="utf-8") as stream:
            write_plan_text(events, stream, header)
    elif binary_stream is not None:
        write_plan_binary(events, binary_stream, header)
    else:
        raise ConfigError("need an output directory or a binary stream")
    return outputs


def run_eval(log_paths: list[str | Path], task: str | None = None) -> list[str]:
    """Per-task 'score <mean>  SR <percent>%' summary lines."""
    logs = []
    for p in log_paths:
        logs.extend(load_episode_logs(p))
    if task is not None:
        logs = [log for log in logs if log.task == task]
    if not logs:
        raise EmptyInput("no episode logs to evaluate")

    lines = []
    for name in sorted({log.task for log in logs}):
        table = builtin_rule_table(name)
        group = [log for log in logs if log.task == name]
        scores = [score_episode(log, table) for log in group]
        mean, rate = aggregate(scores, [log.success for log in group])
        lines.append(f"{name}  score {mean:g}  SR {rate:g}%")
    return lines


def run_exec(manifest_path: str | Path) -> list[str]:
    """Tab-separated per-task execution table: Task, Time, Smth, JOL."""
    manifest = load_manifest(manifest_path)
    if not manifest.samples:
        raise EmptyInput("manifest has no samples")
    by_task: dict[str, list] = {}
    for rec in manifest.samples:
        report = execution_report(read_trajectory(manifest.resolve(rec.traj_file)))
        by_task.setdefault(rec.task, []).append(report)

    lines = ["Task\tTime\tSmth\tJOL"]
    for name in sorted(by_task):
        reports = by_task[name]
        time_s = float(np.mean([r.duration for r in reports]))
        accels = [r.mean_ang_accel for r in reports if r.mean_ang_accel is not None]
        smth = f"{float(np.mean(accels)):.9g}" if accels else "-"
        jol = float(np.mean([r.overlimit_frames for r in reports]))
        lines.append(f"{name}\t{time_s:.9g}\t{smth}\t{jol:.9g}")
    return lines
