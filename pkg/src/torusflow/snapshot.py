"""Binary field snapshots.

Layout, all little-endian::

    b"RT2F" | u32 version (=1) | u32 n | f64 t | n*n f64 samples

Samples are row-major with rows indexed by ``y`` and columns by ``x``.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import IoError, SnapshotCorrupt
from .fields import GridSpec, ScalarField

MAGIC = b"RT2F"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


def write_snapshot(field: ScalarField, t: float, path) -> None:
    body = np.ascontiguousarray(field.values.T, dtype="<f8").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, field.n, float(t)))
            fh.write(body)
    except OSError as exc:
        raise IoError(f"cannot write snapshot {path}: {exc}") from exc


def _parse_header(raw: bytes, path) -> Tuple[int, float]:
    if len(raw) < _HEADER.size:
        raise SnapshotCorrupt(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, n, t = _HEADER.unpack(raw[: _HEADER.size])
    if magic != MAGIC:
        raise SnapshotCorrupt(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotCorrupt(f"{path}: unsupported version {version}")
    return n, t


def read_snapshot_header(path) -> Tuple[int, float]:
    """``(n, t)`` without reading the samples."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read(_HEADER.size)
    except OSError as exc:
        raise IoError(f"cannot read snapshot {path}: {exc}") from exc
    return _parse_header(raw, path)


def read_snapshot(path) -> Tuple[ScalarField, float]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read snapshot {path}: {exc}") from exc
    n, t = _parse_header(raw, path)
    expected = _HEADER.size + 8 * n * n
    if len(raw) != expected:
        raise SnapshotCorrupt(f"{path}: expected {expected} bytes for n={n}, found {len(raw)}")
    try:
        grid = GridSpec(n)
    except ValueError as exc:
        raise SnapshotCorrupt(f"{path}: invalid grid size n={n}") from exc
    vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, n).T
    return ScalarField(grid, vals), t
