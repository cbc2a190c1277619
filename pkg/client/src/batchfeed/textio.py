"""Readers for the engine's newline-delimited text artifacts.

The client parses tolerantly: it pulls the fields it needs and ignores keys
it does not know, so manifest extensions on the engine side never break a
trainer. Structural problems (bad JSON, missing required fields, duplicate
ids) still fail loudly with line numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, TextIO

from .binio import fnv1a64
from .errors import DuplicateId, MalformedRecord, MissingFile

# --- manifests -------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    """The slice of one manifest record a training loop needs."""

    id: str
    source: str
    task: str
    traj_file: str
    pred_file: str | None = None
    checksums: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ManifestData:
    task: str
    version: str
    entries: tuple[ManifestEntry, ...]
    base_dir: Path

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel

    @property
    def cohort_checksum(self) -> str:
        return cohort_checksum(self.entries)


def cohort_checksum(entries: Iterable[ManifestEntry]) -> str:
    """Checksum of the (id, source) cohort, independent of record order.

    Must agree with the value in a plan or weight-table header before any
    ids from that artifact are trusted.
    """
    lines = sorted(f"{e.id}\t{e.source}" for e in entries)
    return fnv1a64("\n".join(lines).encode("utf-8"))


def _parse_line(line: str, lineno: int) -> dict[str, Any]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("each line must be a JSON object", line=lineno)
    return obj


def _entry_from_obj(obj: dict[str, Any], lineno: int) -> ManifestEntry:
    for key in ("id", "source", "task", "traj_file"):
        if key not in obj:
            raise MalformedRecord(f"missing required key '{key}'", line=lineno)
    rec_id = obj["id"]
    if not isinstance(rec_id, str) or not rec_id:
        raise MalformedRecord("id must be a non-empty string", line=lineno)
    checksums = {
        key.removeprefix("checksum_"): str(value)
        for key, value in obj.items()
        if key.startswith("checksum_") and value is not None
    }
    return ManifestEntry(
        id=rec_id,
        source=str(obj["source"]),
        task=str(obj["task"]),
        traj_file=str(obj["traj_file"]),
        pred_file=None if obj.get("pred_file") is None else str(obj["pred_file"]),
        checksums=checksums,
    )


def read_manifest(path: str | Path) -> ManifestData:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    lines = p.read_text("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRecord("empty manifest", line=1)
    header = _parse_line(lines[0], 1)
    if header.get("type") != "manifest":
        raise MalformedRecord('first line must have "type": "manifest"', line=1)

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        entry = _entry_from_obj(_parse_line(line, lineno), lineno)
        if entry.id in seen:
            raise DuplicateId(entry.id)
        seen.add(entry.id)
        entries.append(entry)

    return ManifestData(
        task=str(header.get("task", "")),
        version=str(header.get("version", "")),
        entries=tuple(entries),
        base_dir=p.parent,
    )


# --- weight tables ---------------------------------------------------------


def read_weight_table(path: str | Path) -> tuple[dict[str, Any], dict[str, float]]:
    """(header, id -> weight) from a weight-table file.

    The usual caller is the refresh handshake: reload the table the engine
    wrote at the phase switch, then acknowledge the sentinel.
    """
    lines = Path(path).read_text("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRecord("empty weight table", line=1)
    header = _parse_line(lines[0], 1)
    if header.get("type") != "weights":
        raise MalformedRecord('first line must have "type": "weights"', line=1)
    weights: dict[str, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        obj = _parse_line(line, lineno)
        if "id" not in obj or "weight" not in obj:
            raise MalformedRecord("weight row needs id and weight", line=lineno)
        sample_id = str(obj["id"])
        if sample_id in weights:
            raise DuplicateId(sample_id)
        weights[sample_id] = float(obj["weight"])
    return header, weights


# --- text plans ------------------------------------------------------------

# normalized plan items shared with the binary path:
#   ("slot", step, slot, id) for one drawn sample
#   ("refresh", step, 0, "") for a weight-refresh point

PlanItem = tuple[str, int, int, str]


def read_plan_text_header(stream: TextIO) -> dict[str, Any]:
    """Consume and validate the first line of a text plan."""
    line = stream.readline()
    if not line:
        raise MalformedRecord("empty plan", line=1)
    header = _parse_line(line.rstrip("\n"), 1)
    if header.get("type") != "plan":
        raise MalformedRecord('first line must have "type": "plan"', line=1)
    return header


def iter_plan_text_items(stream: TextIO) -> Iterator[PlanItem]:
    """Yield normalized items from the lines after the header."""
    for lineno, line in enumerate(stream, start=2):
        line = line.rstrip("\n")
        if not line:
            continue
        obj = _parse_line(line, lineno)
        if obj.get("marker") == "refresh":
            yield ("refresh", int(obj["step"]), 0, "")
            continue
        if "step" not in obj or "slot" not in obj or "id" not in obj:
            raise MalformedRecord("plan line needs step/slot/id", line=lineno)
        yield ("slot", int(obj["step"]), int(obj["slot"]), str(obj["id"]))
