"""Newline-delimited text artifacts.

Score files and quality reports print floats with 9 significant digits so
reruns diff cleanly. Weight tables keep full float precision (shortest
round-trip repr) because their sums are checked to 1e-12 after reload. Plan
files carry one {step, slot, id} object per drawn slot plus refresh-marker
lines; the binary framing for pipes lives in binio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO, Iterable, TextIO

from .binio import PLAN_HEADER_SLOT, PLAN_REFRESH_SLOT, encode_plan_frame
from .config import sampler_snapshot
from .errors import MalformedRecord
from .records import SampleRecord, Source
from .sampler import PlanBatch, RefreshMarker, WeightTable


def fmt9(value: float | None) -> str:
    """A float as a JSON number with 9 significant digits; None as null."""
    if value is None:
        return "null"
    if value == 0.0:
        return "0"  # fold -0.0, which a negated empty sum produces
    return f"{value:.9g}"


def _compact(obj: dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


# --- score files -----------------------------------------------------------


@dataclass(frozen=True)
class ScoreRow:
    """One scored sample; the prediction-dependent fields may be absent."""

    id: str
    r_mse: float | None
    r_smooth: float
    r_limit: int
    mse_n: float | None = None
    smooth_n: float | None = None
    limit_n: float | None = None
    s: float | None = None


def score_line(row: ScoreRow) -> str:
    return (
        f'{{"id":{json.dumps(row.id, ensure_ascii=False)}'
        f',"r_mse":{fmt9(row.r_mse)}'
        f',"r_smooth":{fmt9(row.r_smooth)}'
        f',"r_limit":{row.r_limit}'
        f',"mse_n":{fmt9(row.mse_n)}'
        f',"smooth_n":{fmt9(row.smooth_n)}'
        f',"limit_n":{fmt9(row.limit_n)}'
        f',"s":{fmt9(row.s)}}}'
    )


def write_score_file(rows: Iterable[ScoreRow], path: str | Path) -> None:
    text = "".join(score_line(r) + "\n" for r in rows)
    Path(path).write_text(text, "utf-8")


def parse_score_file(path: str | Path) -> dict[str, ScoreRow]:
    rows: dict[str, ScoreRow] = {}
    for lineno, line in enumerate(Path(path).read_text("utf-8").split("\n"), start=1):
        if not line:
            continue
        try:
            obj = json.loads(line)
            row = ScoreRow(
                id=str(obj["id"]),
                r_mse=None if obj["r_mse"] is None else float(obj["r_mse"]),
                r_smooth=float(obj["r_smooth"]),
                r_limit=int(obj["r_limit"]),
                mse_n=None if obj["mse_n"] is None else float(obj["mse_n"]),
                smooth_n=None if obj["smooth_n"] is None else float(obj["smooth_n"]),
                limit_n=None if obj["limit_n"] is None else float(obj["limit_n"]),
                s=None if obj["s"] is None else float(obj["s"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad score row: {exc}", line=lineno) from exc
        rows[row.id] = row
    return rows


# --- quality reports -------------------------------------------------------


def quality_line(rec: SampleRecord) -> str:
    q = rec.quality
    rmse = abs_rel = sq_rel = mat_pix = fg = bg = light = overall = None
    if q is not None:
        if q.depth is not None:
            rmse, abs_rel, sq_rel = q.depth.rmse, q.depth.abs_rel, q.depth.sq_rel
        if q.match is not None:
            mat_pix = q.match.mat_pix
        if q.alignment is not None:
            fg = q.alignment.foreground
            bg = q.alignment.background
            light = q.alignment.lighting
            overall = q.alignment.overall
    if rec.source is Source.REAL or q is None or not q.verdict:
        verdict = "PASS"
    else:
        verdict = "FAIL:" + ",".join(q.verdict)
    return (
        f'{{"id":{json.dumps(rec.id, ensure_ascii=False)}'
        f',"rmse":{fmt9(rmse)}'
        f',"abs_rel":{fmt9(abs_rel)}'
        f',"sq_rel":{fmt9(sq_rel)}'
        f',"mat_pix":{fmt9(mat_pix)}'
        f',"sim_fg":{fmt9(fg)}'
        f',"sim_bg":{fmt9(bg)}'
        f',"sim_light":{fmt9(light)}'
        f',"overall_sim":{fmt9(overall)}'
        f',"verdict":{json.dumps(verdict)}}}'
    )


def write_quality_report(samples: Iterable[SampleRecord], path: str | Path) -> None:
    rows = sorted(samples, key=lambda r: r.id)
    Path(path).write_text("".join(quality_line(r) + "\n" for r in rows), "utf-8")


# --- weight tables ---------------------------------------------------------


def weight_table_bytes(table: WeightTable) -> bytes:
    header = {
        "type": "weights",
        "phase": table.phase.value,
        "cohort_checksum": table.cohort_checksum,
        "config": sampler_snapshot(table.config),
    }
    rows = []
    for stratum in table.strata.values():
        for sample_id, weight in zip(stratum.ids, stratum.weights):
            rows.append((sample_id, float(weight), stratum.name))
    rows.sort(key=lambda r: r[0])
    lines = [_compact(header)]
    lines.extend(
        _compact(
            {"id": i, "weight": w, "phase": table.phase.value, "stratum": name}
        )
        for i, w, name in rows
    )
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_weight_table(table: WeightTable, path: str | Path) -> None:
    Path(path).write_bytes(weight_table_bytes(table))


def read_weight_table(path: str | Path) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    lines = Path(path).read_text("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRecord("empty weight table", line=1)
    header = json.loads(lines[0])
    if header.get("type") != "weights":
        raise MalformedRecord('first line must have "type": "weights"', line=1)
    return header, [json.loads(line) for line in lines[1:]]


# --- batch plans -----------------------------------------------------------


def plan_header(cohort_checksum: str, steps: range, config) -> dict[str, Any]:
    return {
        "type": "plan",
        "cohort_checksum": cohort_checksum,
        "steps": [steps.start, steps.stop],
        "config": sampler_snapshot(config),
    }


def write_plan_text(
    events: Iterable[PlanBatch | RefreshMarker],
    stream: TextIO,
    header: dict[str, Any],
) -> None:
    stream.write(_compact(header) + "\n")
    for event in events:
        if isinstance(event, RefreshMarker):
            stream.write(_compact({"step": event.step, "marker": "refresh"}) + "\n")
        else:
            for slot, sample_id in enumerate(event.ids):
                stream.write(
                    _compact({"step": event.step, "slot": slot, "id": sample_id}) + "\n"
                )


def write_plan_binary(
    events: Iterable[PlanBatch | RefreshMarker],
    stream: BinaryIO,
    header: dict[str, Any],
) -> None:
    stream.write(
        encode_plan_frame(0, PLAN_HEADER_SLOT, _compact(header).encode("utf-8"))
    )
    for event in events:
        if isinstance(event, RefreshMarker):
            stream.write(encode_plan_frame(event.step, PLAN_REFRESH_SLOT, b""))
        else:
            for slot, sample_id in enumerate(event.ids):
                stream.write(
                    encode_plan_frame(event.step, slot, sample_id.encode("utf-8"))
                )


def read_plan_text(
    path: str | Path,
) -> tuple[dict[str, Any], list[PlanBatch | RefreshMarker]]:
    """Parse a plan file back into events, grouping slot lines by step."""
    lines = Path(path).read_text("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedRecord("empty plan", line=1)
    header = json.loads(lines[0])
    if header.get("type") != "plan":
        raise MalformedRecord('first line must have "type": "plan"', line=1)

    events: list[PlanBatch | RefreshMarker] = []
    step: int | None = None
    ids: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        obj = json.loads(line)
        if obj.get("marker") == "refresh":
            if step is not None:
                events.append(PlanBatch(step=step, ids=tuple(ids)))
                step, ids = None, []
            events.append(RefreshMarker(step=int(obj["step"])))
            continue
        if "slot" not in obj or "id" not in obj:
            raise MalformedRecord("plan line needs step/slot/id", line=lineno)
        this_step = int(obj["step"])
        if step is not None and this_step != step:
            events.append(PlanBatch(step=step, ids=tuple(ids)))
            ids = []
        step = this_step
        ids.append(str(obj["id"]))
    if step is not None:
        events.append(PlanBatch(step=step, ids=tuple(ids)))
    return header, events
