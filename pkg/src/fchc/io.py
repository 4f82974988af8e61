"""Field snapshots, scalar series and run manifests on disk.

Binary field layout (all little-endian)::

    b"FCHC1\\0"
    u64 dimension, u64 size per axis ..., u64 time steps
    f64 values, row-major, shape (time steps, *axis sizes)

A single snapshot is stored with one time step.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"FCHC1\0"
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")


def write_field(path, values, shape) -> None:
    """Write ``values`` (``(steps, n_nodes)`` or ``(n_nodes,)``) on a grid of ``shape``."""
    shape = tuple(int(s) for s in shape)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    steps = values.shape[0]
    data = values.reshape((steps,) + shape)
    header = np.array((len(shape),) + shape + (steps,), dtype=_U64)
    _atomic_bytes(path, MAGIC + header.tobytes() + np.ascontiguousarray(data, dtype=_F64).tobytes())


def read_field(path):
    """Return ``(values, shape)`` with ``values`` of shape ``(steps, n_nodes)``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not an FCHC1 field file")
    pos = len(MAGIC)
    dim = int(np.frombuffer(raw, _U64, 1, pos)[0])
    pos += 8
    counts = np.frombuffer(raw, _U64, dim + 1, pos).astype(int)
    pos += 8 * (dim + 1)
    shape, steps = tuple(counts[:dim]), int(counts[dim])
    total = steps * int(np.prod(shape))
    if len(raw) - pos != 8 * total:
        raise ValueError(f"{path}: expected {total} values, found {(len(raw) - pos) // 8}")
    values = np.frombuffer(raw, _F64, total, pos).astype(float)
    return values.reshape(steps, -1), shape


def write_series(path, columns: dict) -> None:
    """RFC-4180 CSV with a header row; columns must have equal length."""
    names = list(columns)
    rows = zip(*(np.asarray(columns[k]).tolist() for k in names))
    fd, tmp = tempfile.mkstemp(dir=Path(path).parent, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(names)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    os.replace(tmp, path)


def read_series(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows).reshape(-1, len(names))
    return {name: data[:, j] for j, name in enumerate(names)}


def write_manifest(path, manifest: dict) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True, default=_json_default)
    _atomic_bytes(path, (text + "\n").encode())


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (np.ndarray, tuple)):
        return list(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _atomic_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
