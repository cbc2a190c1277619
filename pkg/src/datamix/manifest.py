"""Dataset manifests.

A manifest is UTF-8 newline-delimited JSON: one header object
{"type": "manifest", "task": ..., "version": ...} followed by one record
object per sample. Bulk payloads (angles, predictions, depth grids,
embeddings) live in sidecar binaries referenced by path relative to the
manifest's directory, each guarded by an FNV-1a checksum.

Records are written with a fixed key order and default float repr, so
load -> write is byte-identical for canonical files. Non-canonical but
valid files (extra whitespace, integer-typed floats) load fine and come
out canonicalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from .binio import file_checksum, fnv1a64
from .errors import ChecksumMismatch, DuplicateId, MalformedRecord, MissingFile
from .records import (
    DEPTH_ROLES,
    PROMPT_COMPONENTS,
    AlignmentReport,
    DepthMetrics,
    MatchReport,
    QualityReport,
    SampleRecord,
    Source,
)

MANIFEST_VERSION = "1"


def cohort_checksum(samples: Iterable[SampleRecord]) -> str:
    """Checksum of the (id, source) cohort, independent of record order.

    Carried in weight-table and plan headers so downstream consumers can
    detect a manifest swap.
    """
    lines = sorted(f"{s.id}\t{s.source.value}" for s in samples)
    return fnv1a64("\n".join(lines).encode("utf-8"))


# canonical order of checksum keys; also the set of path-bearing fields
_CHECKSUM_KEYS = (
    ("traj_file",),
    ("pred_file",),
    *((f"depth_{role}",) for role in DEPTH_ROLES),
    ("embed_file",),
    ("prompt_embed_file",),
)
CHECKSUM_KEY_ORDER = tuple(k for (k,) in _CHECKSUM_KEYS)

_RECORD_KEYS = frozenset(
    {
        "id",
        "source",
        "task",
        "traj_file",
        "pred_file",
        "depth_files",
        "embed_file",
        "prompt_embed_file",
        "prompt_components",
        "quality",
        "score",
        "weight",
    }
    | {f"checksum_{k}" for k in CHECKSUM_KEY_ORDER}
)


@dataclass
class DatasetManifest:
    task: str
    version: str
    samples: list[SampleRecord]
    base_dir: Path

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel

    def by_id(self) -> dict[str, SampleRecord]:
        return {s.id: s for s in self.samples}

    @property
    def cohort_checksum(self) -> str:
        return cohort_checksum(self.samples)


def _dump(obj: dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _parse_line(line: str, lineno: int) -> dict[str, Any]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("each line must be a JSON object", line=lineno)
    return obj


def _opt_float(obj: dict[str, Any], key: str, lineno: int) -> float | None:
    value = obj.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise MalformedRecord(f"{key} must be a number", line=lineno)
    return float(value)


def _quality_from_obj(obj: Any, lineno: int) -> QualityReport:
    if not isinstance(obj, dict):
        raise MalformedRecord("quality must be an object", line=lineno)
    depth = match = alignment = None
    if "depth" in obj:
        d = obj["depth"]
        depth = DepthMetrics(
            rmse=float(d["rmse"]),
            abs_rel=float(d["abs_rel"]),
            sq_rel=float(d["sq_rel"]),
            scale=float(d["scale"]),
        )
    if "match" in obj:
        m = obj["match"]
        match = MatchReport(
            counts_left=tuple(int(c) for c in m["counts_left"]),
            counts_right=tuple(int(c) for c in m["counts_right"]),
        )
    if "alignment" in obj:
        a = obj["alignment"]
        alignment = AlignmentReport(
            foreground=float(a["foreground"]),
            background=float(a["background"]),
            lighting=float(a["lighting"]),
        )
    verdict = tuple(str(v) for v in obj.get("verdict", []))
    return QualityReport(depth=depth, match=match, alignment=alignment, verdict=verdict)


def _quality_to_obj(q: QualityReport) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if q.depth is not None:
        out["depth"] = {
            "rmse": q.depth.rmse,
            "abs_rel": q.depth.abs_rel,
            "sq_rel": q.depth.sq_rel,
            "scale": q.depth.scale,
        }
    if q.match is not None:
        out["match"] = {
            "counts_left": list(q.match.counts_left),
            "counts_right": list(q.match.counts_right),
        }
    if q.alignment is not None:
        out["alignment"] = {
            "foreground": q.alignment.foreground,
            "background": q.alignment.background,
            "lighting": q.alignment.lighting,
        }
    out["verdict"] = list(q.verdict)
    return out


def _record_from_obj(obj: dict[str, Any], lineno: int) -> SampleRecord:
    unknown = set(obj) - _RECORD_KEYS
    if unknown:
        raise MalformedRecord(f"unknown keys {sorted(unknown)}", line=lineno)
    for key in ("id", "source", "task", "traj_file"):
        if key not in obj:
            raise MalformedRecord(f"missing required key '{key}'", line=lineno)
    rec_id = obj["id"]
    if not isinstance(rec_id, str) or not rec_id:
        raise MalformedRecord("id must be a non-empty string", line=lineno)
    try:
        source = Source(obj["source"])
    except ValueError:
        raise MalformedRecord(
            f"source must be one of {[s.value for s in Source]}, "
            f"got {obj['source']!r}",
            line=lineno,
            record_id=rec_id,
        ) from None

    depth_files: dict[str, str] = {}
    for role, rel in (obj.get("depth_files") or {}).items():
        if role not in DEPTH_ROLES:
            raise MalformedRecord(
                f"unknown depth role {role!r}", line=lineno, record_id=rec_id
            )
        depth_files[role] = str(rel)

    components = tuple(str(c) for c in obj.get("prompt_components", ()))
    if components and sorted(components) != sorted(PROMPT_COMPONENTS):
        raise MalformedRecord(
            f"prompt_components must name each of {list(PROMPT_COMPONENTS)} once",
            line=lineno,
            record_id=rec_id,
        )

    checksums = {}
    for key in CHECKSUM_KEY_ORDER:
        value = obj.get(f"checksum_{key}")
        if value is not None:
            checksums[key] = str(value)

    quality = None
    if obj.get("quality") is not None:
        quality = _quality_from_obj(obj["quality"], lineno)

    return SampleRecord(
        id=rec_id,
        source=source,
        task=str(obj["task"]),
        traj_file=str(obj["traj_file"]),
        pred_file=None if obj.get("pred_file") is None else str(obj["pred_file"]),
        depth_files=depth_files,
        embed_file=None if obj.get("embed_file") is None else str(obj["embed_file"]),
        prompt_embed_file=(
            None if obj.get("prompt_embed_file") is None else str(obj["prompt_embed_file"])
        ),
        prompt_components=components,
        checksums=checksums,
        quality=quality,
        score=_opt_float(obj, "score", lineno),
        weight=_opt_float(obj, "weight", lineno),
    )


def _record_to_obj(rec: SampleRecord) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "id": rec.id,
        "source": rec.source.value,
        "task": rec.task,
        "traj_file": rec.traj_file,
    }
    if rec.pred_file is not None:
        obj["pred_file"] = rec.pred_file
    if rec.depth_files:
        obj["depth_files"] = {
            role: rec.depth_files[role] for role in DEPTH_ROLES if role in rec.depth_files
        }
    if rec.embed_file is not None:
        obj["embed_file"] = rec.embed_file
    if rec.prompt_embed_file is not None:
        obj["prompt_embed_file"] = rec.prompt_embed_file
    if rec.prompt_components:
        obj["prompt_components"] = list(rec.prompt_components)
    for key in CHECKSUM_KEY_ORDER:
        if key in rec.checksums:
            obj[f"checksum_{key}"] = rec.checksums[key]
    if rec.quality is not None:
        obj["quality"] = _quality_to_obj(rec.quality)
    if rec.score is not None:
        obj["score"] = rec.score
    if rec.weight is not None:
        obj["weight"] = rec.weight
    return obj


def _referenced_files(rec: SampleRecord) -> list[tuple[str, str]]:
    """(checksum key, relative path) pairs for every sidecar the record names."""
    pairs = [("traj_file", rec.traj_file)]
    if rec.pred_file is not None:
        pairs.append(("pred_file", rec.pred_file))
    for role in DEPTH_ROLES:
        if role in rec.depth_files:
            pairs.append((f"depth_{role}", rec.depth_files[role]))
    if rec.embed_file is not None:
        pairs.append(("embed_file", rec.embed_file))
    if rec.prompt_embed_file is not None:
        pairs.append(("prompt_embed_file", rec.prompt_embed_file))
    return pairs


def verify_checksums(manifest: DatasetManifest) -> None:
    """Check existence and checksum of every referenced sidecar file."""
    for rec in manifest.samples:
        for key, rel in _referenced_files(rec):
            path = manifest.resolve(rel)
            if not path.is_file():
                raise MissingFile(rel, record_id=rec.id)
            expected = rec.checksums.get(key)
            if expected is None:
                raise MalformedRecord(
                    f"no checksum_{key} for referenced file {rel}", record_id=rec.id
                )
            actual = file_checksum(path)
            if actual != expected:
                raise ChecksumMismatch(rel, expected, actual, record_id=rec.id)


def load_manifest(path: str | Path, verify: bool = True) -> DatasetManifest:
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

    samples: list[SampleRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        rec = _record_from_obj(_parse_line(line, lineno), lineno)
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        samples.append(rec)

    manifest = DatasetManifest(
        task=str(header.get("task", "")),
        version=str(header.get("version", MANIFEST_VERSION)),
        samples=samples,
        base_dir=p.parent,
    )
    if verify:
        verify_checksums(manifest)
    return manifest


def manifest_bytes(manifest: DatasetManifest) -> bytes:
    header = {"type": "manifest", "task": manifest.task, "version": manifest.version}
    lines = [_dump(header)]
    lines.extend(_dump(_record_to_obj(rec)) for rec in manifest.samples)
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Record order is preserved as given; writers sort at creation time."""
    Path(path).write_bytes(manifest_bytes(manifest))
