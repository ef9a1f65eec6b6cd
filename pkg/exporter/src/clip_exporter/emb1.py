"""EMB1 writer (independent implementation of the interchange format).

Layout, little-endian: 8-byte magic "EMBF0001", u32 dim, u64 count, then per
record a u16 id byte-length, the UTF-8 id, and dim float32 values. Writes are
atomic: a temp file in the target directory is renamed into place.

A JSON sidecar at "<path>.json" records the model tag, dim and job
parameters.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"EMBF0001"


def write_emb1(path, ids: list[str], vectors: np.ndarray) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ValueError(f"expected a (count, dim) array, got shape {vectors.shape}")
    count, dim = vectors.shape
    if len(ids) != count:
        raise ValueError(f"{len(ids)} ids for {count} vectors")
    if dim < 1:
        raise ValueError("dim must be positive")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<IQ", dim, count))
            for rid, vec in zip(ids, vectors):
                encoded = rid.encode("utf-8")
                if len(encoded) > 0xFFFF:
                    raise ValueError(f"id longer than 65535 bytes: {rid[:40]!r}")
                f.write(struct.pack("<H", len(encoded)))
                f.write(encoded)
                f.write(vec.tobytes())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_sidecar(path, meta: dict) -> None:
    sidecar = Path(f"{path}.json")
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
