"""Binary formats the client touches, implemented from the wire contract.

All little-endian with a 4-byte ASCII magic:

    EMTR  trajectory   u32 frames, u32 joints, f32 dt, f32 angles
                       (row-major frames x joints), then a 2 x joints f32
                       limits block (lower row, then upper row)
    EMPR  predictions  u32 window count, then per window: u32 start, u32 len,
                       predicted rows, reference rows (f32, len x joints each)
    EMBT  plan frames  u32 length prefix, then magic, u64 step, u32 slot,
                       sample id in UTF-8

Two EMBT slot values are reserved: 0xFFFFFFFE marks the frame whose id bytes
carry the JSON plan header, 0xFFFFFFFF marks a weight-refresh point (empty
id). Checksums are 64-bit FNV-1a over whole file bytes, 16 hex digits.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import MalformedRecord, TruncatedStream

MAGIC_TRAJECTORY = b"EMTR"
MAGIC_PREDICTIONS = b"EMPR"
MAGIC_PLAN_FRAME = b"EMBT"

PLAN_HEADER_SLOT = 0xFFFFFFFE
PLAN_REFRESH_SLOT = 0xFFFFFFFF

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a of raw bytes as 16 hex digits."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def file_checksum(path: str | Path) -> str:
    return fnv1a64(Path(path).read_bytes())


def _read_exact(buf: bytes, offset: int, size: int, path: str) -> bytes:
    if offset + size > len(buf):
        raise MalformedRecord(
            f"file truncated: wanted {size} bytes at offset {offset}, "
            f"have {len(buf)}",
            record_id=path,
        )
    return buf[offset : offset + size]


# --- trajectories (EMTR) ---------------------------------------------------


@dataclass(frozen=True)
class TrajectoryData:
    """Decoded trajectory payload; arrays are read-only float64."""

    angles: np.ndarray  # frames x joints, degrees
    dt: float
    limits: np.ndarray  # 2 x joints: lower row, upper row

    @property
    def frames(self) -> int:
        return self.angles.shape[0]

    @property
    def joints(self) -> int:
        return self.angles.shape[1]


def read_trajectory(path: str | Path) -> TrajectoryData:
    raw = Path(path).read_bytes()
    name = str(path)
    if _read_exact(raw, 0, 4, name) != MAGIC_TRAJECTORY:
        raise MalformedRecord("bad magic, expected EMTR", record_id=name)
    frames, joints, dt = struct.unpack("<IIf", _read_exact(raw, 4, 12, name))
    if frames < 1 or joints < 1:
        raise MalformedRecord(f"bad dimensions {frames}x{joints}", record_id=name)
    n_angle = frames * joints
    angle_bytes = _read_exact(raw, 16, 4 * n_angle, name)
    limit_bytes = _read_exact(raw, 16 + 4 * n_angle, 4 * 2 * joints, name)
    angles = np.frombuffer(angle_bytes, dtype="<f4").reshape(frames, joints).astype(np.float64)
    limits = np.frombuffer(limit_bytes, dtype="<f4").reshape(2, joints).astype(np.float64)
    angles.flags.writeable = False
    limits.flags.writeable = False
    return TrajectoryData(angles=angles, dt=float(dt), limits=limits)


# --- prediction windows (EMPR) ---------------------------------------------


@dataclass(frozen=True)
class PredictionWindow:
    """Predicted-vs-reference action rows for one trajectory window."""

    window_start: int
    predicted: np.ndarray  # len x joints
    reference: np.ndarray  # len x joints


def write_predictions(path: str | Path, windows: list[PredictionWindow]) -> None:
    parts = [MAGIC_PREDICTIONS, struct.pack("<I", len(windows))]
    for w in windows:
        predicted = np.ascontiguousarray(w.predicted, dtype="<f4")
        reference = np.ascontiguousarray(w.reference, dtype="<f4")
        if predicted.ndim != 2 or predicted.shape != reference.shape:
            raise MalformedRecord(
                f"window at {w.window_start}: predicted {predicted.shape} vs "
                f"reference {reference.shape}, need equal 2-d shapes"
            )
        if predicted.shape[0] < 1:
            raise MalformedRecord(f"window at {w.window_start} is empty")
        parts.append(struct.pack("<II", w.window_start, predicted.shape[0]))
        parts.append(predicted.tobytes())
        parts.append(reference.tobytes())
    Path(path).write_bytes(b"".join(parts))


# --- binary plan frames (EMBT) ---------------------------------------------


def decode_plan_frame(payload: bytes, offset: int = 0) -> tuple[int, int, bytes]:
    """Split a frame payload into (step, slot, id bytes).

    `offset` is the stream position of the payload, used only for error
    reporting.
    """
    if len(payload) < 16:
        raise TruncatedStream(offset, f"frame payload of {len(payload)} bytes, need >= 16")
    if payload[:4] != MAGIC_PLAN_FRAME:
        raise TruncatedStream(offset, "bad frame magic, expected EMBT")
    step, slot = struct.unpack_from("<QI", payload, 4)
    return step, slot, payload[16:]


def iter_plan_frames(stream: BinaryIO) -> Iterator[tuple[int, int, bytes]]:
    """Yield decoded (step, slot, id bytes) frames from a binary stream.

    Stops cleanly at end of stream between frames; a partial length prefix or
    a short payload raises TruncatedStream with the byte offset.
    """
    offset = 0
    while True:
        prefix = stream.read(4)
        if not prefix:
            return
        if len(prefix) < 4:
            raise TruncatedStream(offset, f"partial length prefix of {len(prefix)} bytes")
        (length,) = struct.unpack("<I", prefix)
        payload = stream.read(length)
        if len(payload) < length:
            raise TruncatedStream(
                offset + 4, f"frame payload truncated at {len(payload)}/{length} bytes"
            )
        yield decode_plan_frame(payload, offset + 4)
        offset += 4 + length
