from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from datamix.binio import file_checksum, write_predictions, write_trajectory
from datamix.manifest import DatasetManifest, write_manifest
from datamix.records import ActionChunkPair, JointTrajectory, SampleRecord, Source


def make_traj(
    angles, dt: float = 1.0, lower: float = -100.0, upper: float = 100.0
) -> JointTrajectory:
    angles = np.asarray(angles, dtype=np.float64)
    joints = angles.shape[1]
    limits = np.array([[lower] * joints, [upper] * joints])
    return JointTrajectory(angles=angles, dt=dt, limits=limits)


def random_trajectory(rng: np.random.Generator) -> JointTrajectory:
    frames = int(rng.integers(3, 21))
    joints = int(rng.integers(1, 8))
    angles = rng.uniform(-80.0, 80.0, size=(frames, joints))
    lower = rng.uniform(-120.0, -60.0, size=joints)
    upper = rng.uniform(60.0, 120.0, size=joints)
    dt = float(rng.uniform(0.01, 0.5))
    return JointTrajectory(angles=angles, dt=dt, limits=np.stack([lower, upper]))


def random_windows(
    rng: np.random.Generator, traj: JointTrajectory
) -> list[ActionChunkPair]:
    windows = []
    for _ in range(int(rng.integers(1, 4))):
        start = int(rng.integers(0, traj.frames))
        length = int(rng.integers(1, traj.frames - start + 1))
        reference = np.asarray(traj.angles[start : start + length])
        predicted = reference + rng.normal(0.0, 1.0, size=reference.shape)
        windows.append(
            ActionChunkPair(
                predicted=predicted,
                reference=reference,
                window_start=start,
                window_len=length,
            )
        )
    return windows


def write_sample(
    root: Path,
    sample_id: str,
    traj: JointTrajectory,
    windows: list[ActionChunkPair] | None = None,
    source: Source = Source.REAL,
    task: str = "test",
) -> SampleRecord:
    """Write trajectory (and optional prediction) sidecars; returns the record."""
    traj_rel = f"traj_{sample_id}.emtr"
    write_trajectory(root / traj_rel, traj)
    rec = SampleRecord(
        id=sample_id,
        source=source,
        task=task,
        traj_file=traj_rel,
        checksums={"traj_file": file_checksum(root / traj_rel)},
    )
    if windows is not None:
        pred_rel = f"pred_{sample_id}.empr"
        write_predictions(root / pred_rel, windows)
        rec.pred_file = pred_rel
        rec.checksums["pred_file"] = file_checksum(root / pred_rel)
    return rec


def write_tiny_manifest(
    root: Path, records: list[SampleRecord], task: str = "test"
) -> Path:
    records = sorted(records, key=lambda r: r.id)
    path = root / "manifest.jsonl"
    write_manifest(
        DatasetManifest(task=task, version="1", samples=records, base_dir=root), path
    )
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion at the end of a run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", None) != "call":
                continue
            if "test_acceptance.py" in rep.nodeid:
                name = rep.nodeid.split("::")[-1]
                rows.append((name, outcome == "passed"))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, ok in rows:
        label = name.removeprefix("test_").replace("_", " ")
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")
