"""Manifest ingestion, attribute-based caption generation, and the EMB1
embedding interchange format.

EMB1 layout (little-endian throughout):
    8 bytes   magic "EMBF0001"
    u32       dim
    u64       record count
    per record:
        u16       id length in bytes
        bytes     UTF-8 id
        dim * f32 vector

A sidecar JSON file (same path with ".json" appended) records provider
name, model tag, dim, and creation parameters.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augment import Caption
from .errors import DataError, EmbeddingFormatError

log = logging.getLogger(__name__)

EMB1_MAGIC = b"EMBF0001"
MANIFEST_SCHEMA = "manifest-v1"

_REQUIRED_FIELDS = ("entry_id", "person_id", "image_path")
_DEFAULT_TEMPLATES = "peta_templates.tsv"


@dataclass(frozen=True)
class ManifestRecord:
    entry_id: str
    person_id: str
    image_path: str
    camera_id: str | None = None
    captions: tuple[str, ...] = ()
    attributes: tuple[str, ...] | None = None


def load_manifest(path) -> list[ManifestRecord]:
    """Read and validate a JSONL manifest; order-preserving."""
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            for name in _REQUIRED_FIELDS:
                if name not in obj or obj[name] in (None, ""):
                    raise DataError(f"{path}:{lineno}: missing field {name!r}")
            entry_id = str(obj["entry_id"])
            if entry_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate entry_id {entry_id!r}")
            seen.add(entry_id)
            captions = obj.get("captions") or []
            if not isinstance(captions, list) or any(not isinstance(c, str) for c in captions):
                raise DataError(f"{path}:{lineno}: captions must be a list of strings")
            attributes = obj.get("attributes")
            if attributes is not None:
                if not isinstance(attributes, list) or any(
                    not isinstance(a, str) for a in attributes
                ):
                    raise DataError(f"{path}:{lineno}: attributes must be a list of strings")
                attributes = tuple(attributes)
            camera_id = obj.get("camera_id")
            records.append(
                ManifestRecord(
                    entry_id=entry_id,
                    person_id=str(obj["person_id"]),
                    image_path=str(obj["image_path"]),
                    camera_id=str(camera_id) if camera_id is not None else None,
                    captions=tuple(captions),
                    attributes=attributes,
                )
            )
    stats = manifest_stats(records)
    log.info(
        "loaded manifest %s: %d images, %d texts, %d cameras",
        path, stats["images"], stats["texts"], stats["cameras"],
    )
    return records


def manifest_stats(records: Sequence[ManifestRecord]) -> dict[str, int]:
    return {
        "images": len(records),
        "texts": sum(len(r.captions) for r in records),
        "cameras": len({r.camera_id for r in records if r.camera_id is not None}),
    }


def load_templates(path=None) -> dict[str, str]:
    """Load an attribute->phrase table (TSV, # comments). Defaults to the
    packaged pedestrian-attribute table."""
    if path is None:
        text = (resources.files("cutmixout") / "data" / _DEFAULT_TEMPLATES).read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    templates: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise DataError(f"template line {lineno}: expected attribute<TAB>phrase")
        # columns past the phrase (e.g. provenance notes) are ignored
        attr, phrase = line.split("\t")[:2]
        templates[attr.strip()] = phrase.strip()
    return templates


def attributes_to_caption(
    attributes: Sequence[str],
    templates: dict[str, str] | None = None,
    max_words: int = 21,
    caption_id: str = "attr",
) -> Caption:
    """Render attribute tokens to one comma-joined sentence.

    Phrases follow the attribute order; whole phrases are dropped from the
    tail (never split) once the word budget is reached. Unknown attributes
    fall back to "has <attribute>" with a warning.
    """
    if not attributes:
        raise DataError("attribute list must be nonempty")
    if max_words < 1:
        raise DataError(f"max_words must be positive, got {max_words}")
    if templates is None:
        templates = load_templates()
    phrases = []
    for attr in attributes:
        phrase = templates.get(attr)
        if phrase is None:
            log.warning("no template for attribute %r, using generic fallback", attr)
            phrase = f"has {attr}"
        phrases.append(phrase)
    kept = []
    budget = max_words
    for phrase in phrases:
        n_words = len(phrase.split())
        if n_words > budget:
            break
        kept.append(phrase)
        budget -= n_words
    if not kept:
        raise DataError(
            f"first phrase {phrases[0]!r} alone exceeds max_words={max_words}"
        )
    return Caption(id=caption_id, text=", ".join(kept))


def write_embeddings(
    path,
    records: Iterable[tuple[str, np.ndarray]],
    dim: int | None = None,
    meta: dict | None = None,
) -> None:
    """Write EMB1, converting vectors to little-endian float32.

    ``dim`` is inferred from the first record when omitted, and is required
    for an empty record list. ``meta`` is written to the JSON sidecar.
    """
    items = [(str(rid), np.asarray(vec, dtype="<f4")) for rid, vec in records]
    if dim is None:
        if not items:
            raise DataError("dim is required when writing zero records")
        dim = int(items[0][1].shape[0])
    if dim < 1:
        raise DataError(f"dim must be positive, got {dim}")
    for rid, vec in items:
        if vec.ndim != 1 or vec.shape[0] != dim:
            raise EmbeddingFormatError(
                f"record {rid!r} has shape {vec.shape}, expected ({dim},)"
            )
    with open(path, "wb") as f:
        f.write(EMB1_MAGIC)
        f.write(struct.pack("<IQ", dim, len(items)))
        for rid, vec in items:
            encoded = rid.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise DataError(f"record id longer than 65535 bytes: {rid[:40]!r}...")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(vec.tobytes())
    if meta is not None:
        with open(sidecar_path(path), "w", encoding="utf-8") as f:
            json.dump(dict(meta, dim=dim, count=len(items)), f, indent=2, sort_keys=True)
            f.write("\n")


def read_embeddings(path) -> list[tuple[str, np.ndarray]]:
    """Read EMB1 records in file order; floats come back bit-exact."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != EMB1_MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {data[:8]!r}, expected {EMB1_MAGIC!r}")
    if len(data) < 8 + 12:
        raise EmbeddingFormatError(f"{path}: truncated header")
    dim, count = struct.unpack_from("<IQ", data, 8)
    if dim < 1:
        raise EmbeddingFormatError(f"{path}: header dim must be positive, got {dim}")
    offset = 20
    vec_bytes = 4 * dim
    records: list[tuple[str, np.ndarray]] = []
    for i in range(count):
        if offset + 2 > len(data):
            raise EmbeddingFormatError(f"{path}: truncated at record {i} (header count {count})")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(data):
            raise EmbeddingFormatError(f"{path}: truncated at record {i} (header count {count})")
        rid = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        records.append((rid, vec))
    if offset != len(data):
        raise EmbeddingFormatError(f"{path}: {len(data) - offset} trailing bytes after {count} records")
    return records


def sidecar_path(path) -> str:
    return f"{path}.json"


def read_sidecar(path) -> dict | None:
    sidecar = Path(sidecar_path(path))
    if not sidecar.exists():
        return None
    return json.loads(sidecar.read_text("utf-8"))


def load_embedding_map(path) -> tuple[dict[str, np.ndarray], int]:
    """Read EMB1 into an id->vector map; duplicate ids are an error."""
    records = read_embeddings(path)
    if not records:
        raise DataError(f"{path}: no embedding records")
    by_id: dict[str, np.ndarray] = {}
    for rid, vec in records:
        if rid in by_id:
            raise DataError(f"{path}: duplicate embedding id {rid!r}")
        by_id[rid] = vec
    return by_id, int(records[0][1].shape[0])
