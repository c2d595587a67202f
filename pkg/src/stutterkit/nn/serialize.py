"""Self-describing binary container for trained models.

Layout: magic ``GRCN``, u32 version (currently 1), length-prefixed JSON
metadata (layer specs, input shape, tensor order, plus whatever the
caller attaches: feature config, threshold, normalization), then each
tensor as length-prefixed name, u32 rank, u64 dims, raw little-endian
float64 data. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import StutterKitError
from .graph import ModelGraph

MAGIC = b"GRCN"
VERSION = 1


class CorruptModel(StutterKitError):
    """Container magic/version/structure/length check failed."""


def serialize_model(model: ModelGraph, extra_metadata: dict | None = None) -> bytes:
    tensors = list(model.parameters())
    metadata = {
        "input_shape": list(model.input_shape),
        "layers": model.layer_specs(),
        "tensors": [key for key, _ in tensors],
    }
    if extra_metadata:
        overlap = metadata.keys() & extra_metadata.keys()
        if overlap:
            raise ValueError(f"extra metadata may not override {sorted(overlap)}")
        metadata.update(extra_metadata)

    blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(blob)), blob]
    for key, param in tensors:
        name = key.encode("utf-8")
        parts.append(struct.pack("<I", len(name)))
        parts.append(name)
        parts.append(struct.pack("<I", param.ndim))
        parts.append(struct.pack(f"<{param.ndim}Q", *param.shape))
        parts.append(np.ascontiguousarray(param, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptModel(f"truncated container (needed {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def deserialize_model(data: bytes) -> tuple[ModelGraph, dict]:
    """Rebuild a ModelGraph and return (model, metadata)."""
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CorruptModel("bad magic, not a GRCN container")
    version = reader.u32()
    if version != VERSION:
        raise CorruptModel(f"unsupported container version {version} (expected {VERSION})")

    blob = reader.take(reader.u32())
    try:
        metadata = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"unreadable metadata: {exc}") from exc
    for required in ("input_shape", "layers", "tensors"):
        if required not in metadata:
            raise CorruptModel(f"metadata missing {required!r}")

    try:
        model = ModelGraph.from_specs(metadata["input_shape"], metadata["layers"])
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptModel(f"invalid layer specs: {exc}") from exc

    expected = {key: param.shape for key, param in model.parameters()}
    seen = []
    for _ in metadata["tensors"]:
        name = reader.take(reader.u32()).decode("utf-8")
        rank = reader.u32()
        dims = tuple(reader.u64() for _ in range(rank))
        raw = reader.take(8 * int(np.prod(dims, dtype=np.int64)) if dims else 8 * 0)
        if name not in expected:
            raise CorruptModel(f"unexpected tensor {name!r}")
        if dims != expected[name]:
            raise CorruptModel(f"tensor {name!r} has dims {dims}, expected {expected[name]}")
        values = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(np.float64)
        model.set_parameter(name, values)
        seen.append(name)

    if reader.pos != len(data):
        raise CorruptModel(f"{len(data) - reader.pos} trailing bytes after last tensor")
    if set(seen) != set(expected):
        missing = sorted(set(expected) - set(seen))
        raise CorruptModel(f"missing tensors {missing}")
    return model, metadata
