"""Binary sidecar formats and the manifest checksum.

All formats are little-endian with a 4-byte ASCII magic:

    EMTR  trajectory   u32 frames, u32 joints, f32 dt, then f32 angles
                       (row-major frames x joints), then limits as a 2 x joints
                       f32 block (lower row, then upper row)
    EMPR  predictions  u32 window count, then per window: u32 start, u32 len,
                       predicted rows, reference rows (f32, len x joints each)
    EMDP  depth grids  u32 frames, u32 height, u32 width, f32 values
                       (frame-major, row-major)
    EMEM  embeddings   u32 count, u32 dim, f32 vectors

The prediction format carries no joint count; the caller supplies it from the
sample's trajectory. Checksums are 64-bit FNV-1a over whole file bytes,
rendered as 16 hex digits.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

from .errors import MalformedRecord, NonPositiveDepth, TruncatedStream
from .records import ActionChunkPair, JointTrajectory

MAGIC_TRAJECTORY = b"EMTR"
MAGIC_PREDICTIONS = b"EMPR"
MAGIC_DEPTH = b"EMDP"
MAGIC_EMBEDDINGS = b"EMEM"
MAGIC_PLAN_FRAME = b"EMBT"

# slot sentinels for non-batch frames in the binary plan stream
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


def _f32(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype="<f4")


# --- trajectories (EMTR) ---------------------------------------------------


def write_trajectory(path: str | Path, traj: JointTrajectory) -> None:
    header = MAGIC_TRAJECTORY + struct.pack("<IIf", traj.frames, traj.joints, traj.dt)
    body = _f32(traj.angles).tobytes() + _f32(traj.limits).tobytes()
    Path(path).write_bytes(header + body)


def read_trajectory(path: str | Path) -> JointTrajectory:
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
    angles = np.frombuffer(angle_bytes, dtype="<f4").reshape(frames, joints)
    limits = np.frombuffer(limit_bytes, dtype="<f4").reshape(2, joints)
    return JointTrajectory(angles=angles, dt=float(dt), limits=limits)


# --- prediction windows (EMPR) ---------------------------------------------


def write_predictions(path: str | Path, windows: list[ActionChunkPair]) -> None:
    parts = [MAGIC_PREDICTIONS, struct.pack("<I", len(windows))]
    for w in windows:
        parts.append(struct.pack("<II", w.window_start, w.window_len))
        parts.append(_f32(w.predicted).tobytes())
        parts.append(_f32(w.reference).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_predictions(path: str | Path, joints: int) -> list[ActionChunkPair]:
    raw = Path(path).read_bytes()
    name = str(path)
    if _read_exact(raw, 0, 4, name) != MAGIC_PREDICTIONS:
        raise MalformedRecord("bad magic, expected EMPR", record_id=name)
    (count,) = struct.unpack("<I", _read_exact(raw, 4, 4, name))
    offset = 8
    windows = []
    for _ in range(count):
        start, length = struct.unpack("<II", _read_exact(raw, offset, 8, name))
        offset += 8
        if length < 1:
            raise MalformedRecord(f"window_len {length} must be >= 1", record_id=name)
        block = 4 * length * joints
        predicted = np.frombuffer(_read_exact(raw, offset, block, name), dtype="<f4")
        offset += block
        reference = np.frombuffer(_read_exact(raw, offset, block, name), dtype="<f4")
        offset += block
        windows.append(
            ActionChunkPair(
                predicted=predicted.reshape(length, joints),
                reference=reference.reshape(length, joints),
                window_start=start,
                window_len=length,
            )
        )
    if offset != len(raw):
        raise MalformedRecord(
            f"{len(raw) - offset} trailing bytes after {count} windows", record_id=name
        )
    return windows


# --- depth grids (EMDP) ----------------------------------------------------


def write_depth(path: str | Path, values: np.ndarray) -> None:
    """Write a (frames, height, width) grid of positive depths in meters."""
    grid = np.asarray(values, dtype=np.float64)
    if grid.ndim != 3:
        raise MalformedRecord(f"depth grid must be 3-d, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
        raise NonPositiveDepth("depth grid contains non-positive or non-finite values")
    frames, height, width = grid.shape
    header = MAGIC_DEPTH + struct.pack("<III", frames, height, width)
    Path(path).write_bytes(header + _f32(grid).tobytes())


def read_depth(path: str | Path) -> np.ndarray:
    """Load a depth grid, rejecting non-finite or non-positive values."""
    raw = Path(path).read_bytes()
    name = str(path)
    if _read_exact(raw, 0, 4, name) != MAGIC_DEPTH:
        raise MalformedRecord("bad magic, expected EMDP", record_id=name)
    frames, height, width = struct.unpack("<III", _read_exact(raw, 4, 12, name))
    n = frames * height * width
    values = np.frombuffer(_read_exact(raw, 16, 4 * n, name), dtype="<f4")
    grid = values.reshape(frames, height, width).astype(np.float64)
    if not np.all(np.isfinite(grid)) or np.any(grid <= 0):
        raise NonPositiveDepth(f"depth grid {name} contains non-positive or non-finite values")
    grid.flags.writeable = False
    return grid


# --- embeddings (EMEM) -----------------------------------------------------


def write_embeddings(path: str | Path, vectors: np.ndarray) -> None:
    mat = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    count, dim = mat.shape
    header = MAGIC_EMBEDDINGS + struct.pack("<II", count, dim)
    Path(path).write_bytes(header + _f32(mat).tobytes())


def read_embeddings(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    name = str(path)
    if _read_exact(raw, 0, 4, name) != MAGIC_EMBEDDINGS:
        raise MalformedRecord("bad magic, expected EMEM", record_id=name)
    count, dim = struct.unpack("<II", _read_exact(raw, 4, 8, name))
    vectors = np.frombuffer(_read_exact(raw, 12, 4 * count * dim, name), dtype="<f4")
    mat = vectors.reshape(count, dim).astype(np.float64)
    mat.flags.writeable = False
    return mat


# --- binary plan frames (EMBT) ---------------------------------------------
#
# Streaming form of the batch plan for pipes and sockets. Each frame is a u32
# length prefix followed by the payload: magic "EMBT", u64 step, u32 slot,
# then the sample id in UTF-8. Two slot values are reserved: PLAN_HEADER_SLOT
# marks a frame whose id bytes carry the JSON plan header, PLAN_REFRESH_SLOT
# marks the weight-table refresh point (empty id).


def encode_plan_frame(step: int, slot: int, id_bytes: bytes) -> bytes:
    payload = MAGIC_PLAN_FRAME + struct.pack("<QI", step, slot) + id_bytes
    return struct.pack("<I", len(payload)) + payload


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
