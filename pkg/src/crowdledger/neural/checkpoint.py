"""Model checkpoints: versioned header, JSON manifest, float64 blob.

Byte layout: magic ``CLCK`` (4 bytes), format version (4-byte LE unsigned),
manifest length (8-byte LE unsigned), manifest JSON (utf-8), then every
parameter tensor flattened C-order as little-endian float64, concatenated in
manifest order.  The manifest carries the architecture spec plus the name
and shape of each tensor.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"CLCK"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, spec: dict, params) -> None:
    manifest = {
        "spec": spec,
        "params": [{"name": p.name, "shape": list(p.value.shape)} for p in params],
    }
    blob = b"".join(np.ascontiguousarray(p.value, dtype="<f8").tobytes() for p in params)
    payload = json.dumps(manifest, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        fh.write(blob)


def load_checkpoint(path) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = struct.unpack("<I", raw[4:8])[0]
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    length = struct.unpack("<Q", raw[8:16])[0]
    manifest = json.loads(raw[16 : 16 + length].decode("utf-8"))
    offset = 16 + length
    arrays = []
    for entry in manifest["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        arrays.append(arr.astype(np.float64))
        offset += count * 8
    if offset != len(raw):
        raise CheckpointError("trailing bytes after parameter blob")
    return manifest["spec"], arrays
