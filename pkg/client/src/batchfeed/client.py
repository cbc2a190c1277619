"""Ordered replay of batch plans for a training loop.

The iterator yields two kinds of events:

    Batch          step plus the sample payloads drawn for it, in plan order
    WeightRefresh  the engine recomputed sampling weights at this step; the
                   loop must reload the weight table (read_weight_table) and
                   call acknowledge() before asking for the next event

Payloads load their trajectory lazily on first access and verify the
manifest checksum when they do. One consumer per plan stream; prefetching
payloads from worker threads is fine because plan order is fixed up front.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO, Iterator, Union

from .binio import (
    MAGIC_PLAN_FRAME,
    PLAN_HEADER_SLOT,
    PLAN_REFRESH_SLOT,
    PredictionWindow,
    TrajectoryData,
    file_checksum,
    iter_plan_frames,
    read_trajectory,
    write_predictions,
)
from .errors import (
    ChecksumMismatch,
    MalformedRecord,
    MissingFile,
    RefreshNotAcknowledged,
    TruncatedStream,
)
from .textio import (
    ManifestData,
    ManifestEntry,
    PlanItem,
    iter_plan_text_items,
    read_manifest,
    read_plan_text_header,
)

PlanSource = Union[str, Path, BinaryIO]


class SamplePayload:
    """One sample's metadata plus its lazily loaded trajectory."""

    def __init__(self, entry: ManifestEntry, base_dir: Path):
        self.id = entry.id
        self.source = entry.source
        self.task = entry.task
        self._entry = entry
        self._base = base_dir
        self._traj: TrajectoryData | None = None

    @property
    def trajectory(self) -> TrajectoryData:
        if self._traj is None:
            path = self._base / self._entry.traj_file
            if not path.is_file():
                raise MissingFile(self._entry.traj_file, record_id=self.id)
            expected = self._entry.checksums.get("traj_file")
            if expected is None:
                raise MalformedRecord(
                    f"no checksum for referenced file {self._entry.traj_file}",
                    record_id=self.id,
                )
            actual = file_checksum(path)
            if actual != expected:
                raise ChecksumMismatch(
                    self._entry.traj_file, expected, actual, record_id=self.id
                )
            self._traj = read_trajectory(path)
        return self._traj

    def __repr__(self) -> str:
        return f"SamplePayload(id={self.id!r}, source={self.source!r})"


@dataclass(frozen=True)
class Batch:
    step: int
    samples: tuple[SamplePayload, ...]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.samples)


class WeightRefresh:
    """Sentinel between the last batch of one phase and the first of the next."""

    def __init__(self, step: int):
        self.step = step
        self.acknowledged = False

    def acknowledge(self) -> None:
        self.acknowledged = True

    def __repr__(self) -> str:
        state = "acknowledged" if self.acknowledged else "pending"
        return f"WeightRefresh(step={self.step}, {state})"


def _frame_items(
    frames: Iterator[tuple[int, int, bytes]],
) -> Iterator[PlanItem]:
    for step, slot, id_bytes in frames:
        if slot == PLAN_REFRESH_SLOT:
            yield ("refresh", step, 0, "")
        elif slot == PLAN_HEADER_SLOT:
            raise MalformedRecord(f"unexpected header frame at step {step}")
        else:
            yield ("slot", step, slot, id_bytes.decode("utf-8"))


def _open_plan(source: PlanSource) -> tuple[dict[str, Any], Iterator[PlanItem]]:
    """Read the plan header eagerly; return it with the item stream.

    A path is sniffed by content: binary plans start with a length-prefixed
    EMBT frame, text plans with the JSON header line. A file-like object is
    taken to be the binary framing, which is what the engine emits on pipes.
    """
    if isinstance(source, (str, Path)):
        p = Path(source)
        if not p.is_file():
            raise MissingFile(str(p))
        with open(p, "rb") as probe:
            head = probe.read(8)
        if head[4:8] == MAGIC_PLAN_FRAME:
            return _open_plan(open(p, "rb"))
        if head[:1] != b"{":
            raise MalformedRecord(f"{p} is neither a text plan nor a frame stream")
        stream = open(p, "r", encoding="utf-8")
        return read_plan_text_header(stream), iter_plan_text_items(stream)

    frames = iter_plan_frames(source)
    try:
        step, slot, payload = next(frames)
    except StopIteration:
        raise TruncatedStream(0, "empty plan stream") from None
    if slot != PLAN_HEADER_SLOT:
        raise MalformedRecord("first frame must be the plan header")
    return json.loads(payload.decode("utf-8")), _frame_items(frames)


class BatchIterator:
    """Replays a batch plan against a manifest, in exact plan order."""

    def __init__(self, manifest_path: str | Path, plan_source: PlanSource):
        self.manifest: ManifestData = read_manifest(manifest_path)
        self._payloads = {
            e.id: SamplePayload(e, self.manifest.base_dir)
            for e in self.manifest.entries
        }
        self.header, items = _open_plan(plan_source)
        expected = str(self.header.get("cohort_checksum", ""))
        actual = self.manifest.cohort_checksum
        if expected != actual:
            raise ChecksumMismatch("plan cohort", expected, actual)
        self._events = self._grouped(items)
        self._pending: WeightRefresh | None = None
        self.current_step: int | None = None

    def _payload(self, sample_id: str) -> SamplePayload:
        try:
            return self._payloads[sample_id]
        except KeyError:
            raise MalformedRecord(
                f"plan names sample {sample_id!r} absent from the manifest"
            ) from None

    def _grouped(self, items: Iterator[PlanItem]) -> Iterator[Batch | WeightRefresh]:
        step: int | None = None
        payloads: list[SamplePayload] = []
        for kind, item_step, slot, sample_id in items:
            if kind == "refresh":
                if step is not None:
                    yield Batch(step=step, samples=tuple(payloads))
                    step, payloads = None, []
                yield WeightRefresh(item_step)
                continue
            if step is not None and item_step != step:
                yield Batch(step=step, samples=tuple(payloads))
                payloads = []
            step = item_step
            if slot != len(payloads):
                raise MalformedRecord(
                    f"step {step}: slot {slot} arrived out of order"
                )
            payloads.append(self._payload(sample_id))
        if step is not None:
            yield Batch(step=step, samples=tuple(payloads))

    def __iter__(self) -> "BatchIterator":
        return self

    def __next__(self) -> Batch | WeightRefresh:
        if self._pending is not None and not self._pending.acknowledged:
            raise RefreshNotAcknowledged(self._pending.step)
        event = next(self._events)
        if isinstance(event, WeightRefresh):
            self._pending = event
        else:
            self._pending = None
            self.current_step = event.step
        return event


def iter_batches(manifest_path: str | Path, plan_source: PlanSource) -> BatchIterator:
    """Iterator of Batch and WeightRefresh events for a manifest plus plan.

    Raises ChecksumMismatch up front when the plan header's cohort checksum
    does not match the manifest, so a stale plan never feeds a single batch.
    """
    return BatchIterator(manifest_path, plan_source)


def submit_predictions(
    windows: list[PredictionWindow], path: str | Path
) -> Path:
    """Write evaluation windows in the format the engine's scorer reads."""
    write_predictions(path, windows)
    return Path(path)
