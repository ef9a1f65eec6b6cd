"""clip-exporter CLI.

    clip-exporter export --manifest m.jsonl [--variants v.jsonl] \
        --model ViT-B/32 --out-images img.embf --out-texts txt.embf \
        --batch 64 [--stub] [--on-missing skip|fail] [--device cpu]

Encodes every manifest image (one EMB1 record per entry_id) and every
caption or pre-generated variant text (one record per caption/variant id),
writing EMB1 files plus JSON sidecars. Embeddings are raw encoder outputs;
no normalization is applied here.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .emb1 import write_emb1, write_sidecar
from .encoders import build_encoder
from .models import SUPPORTED_TAGS, resolve_tag

log = logging.getLogger("clip_exporter")


class ExportError(ValueError):
    pass


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ExportError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
    return rows


def collect_texts(manifest_rows: list[dict], variants_path) -> tuple[list[str], list[str]]:
    """(ids, texts) to encode: variant rows when given, manifest captions
    otherwise (id = entry_id, extra captions suffixed '#t<i>')."""
    ids, texts = [], []
    if variants_path is not None:
        for row in read_jsonl(variants_path):
            if "id" not in row or "text" not in row:
                raise ExportError(f"{variants_path}: variant rows need 'id' and 'text'")
            ids.append(str(row["id"]))
            texts.append(str(row["text"]))
        return ids, texts
    for row in manifest_rows:
        captions = row.get("captions") or []
        for i, caption in enumerate(captions):
            ids.append(row["entry_id"] if i == 0 else f"{row['entry_id']}#t{i}")
            texts.append(caption)
    return ids, texts


def collect_images(manifest_rows: list[dict], root: Path, on_missing: str) -> tuple[list[str], list[str]]:
    ids, paths = [], []
    for row in manifest_rows:
        if "entry_id" not in row or "image_path" not in row:
            raise ExportError("manifest rows need 'entry_id' and 'image_path'")
        path = root / row["image_path"]
        if not path.exists():
            if on_missing == "fail":
                raise ExportError(f"image not found: {path}")
            log.warning("skipping %s: image not found at %s", row["entry_id"], path)
            continue
        ids.append(str(row["entry_id"]))
        paths.append(str(path))
    return ids, paths


def in_batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def cmd_export(args) -> int:
    spec = resolve_tag(args.model)
    encoder = build_encoder(spec, stub=args.stub, device=args.device)
    manifest_rows = read_jsonl(args.manifest)
    if not manifest_rows:
        raise ExportError(f"{args.manifest}: empty manifest")
    root = Path(args.manifest).parent if args.image_root is None else Path(args.image_root)

    base_meta = {
        "provider": "clip-exporter",
        "exporter_version": __version__,
        "model": spec.tag,
        "dim": spec.dim,
        "stub": args.stub,
        "batch": args.batch,
    }

    if args.out_images:
        ids, paths = collect_images(manifest_rows, root, args.on_missing)
        chunks = [encoder.encode_images(batch) for batch in in_batches(paths, args.batch)]
        vectors = (
            np.concatenate(chunks) if chunks else np.empty((0, spec.dim), dtype=np.float32)
        )
        write_emb1(args.out_images, ids, vectors)
        write_sidecar(args.out_images, dict(base_meta, kind="image", count=len(ids)))
        print(f"wrote {len(ids)} image embeddings (dim {spec.dim}) to {args.out_images}")

    if args.out_texts:
        ids, texts = collect_texts(manifest_rows, args.variants)
        if not ids:
            raise ExportError("no captions or variants to encode")
        chunks = [encoder.encode_texts(batch) for batch in in_batches(texts, args.batch)]
        vectors = (
            np.concatenate(chunks) if chunks else np.empty((0, spec.dim), dtype=np.float32)
        )
        write_emb1(args.out_texts, ids, vectors)
        write_sidecar(args.out_texts, dict(base_meta, kind="text", count=len(ids)))
        print(f"wrote {len(ids)} text embeddings (dim {spec.dim}) to {args.out_texts}")

    if not args.out_images and not args.out_texts:
        raise ExportError("nothing to do: pass --out-images and/or --out-texts")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clip-exporter")
    parser.add_argument("--version", action="version", version=f"clip-exporter {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("export", help="encode manifest images/texts into EMB1 files")
    p.add_argument("--manifest", required=True, metavar="JSONL")
    p.add_argument("--variants", metavar="JSONL",
                   help="pre-generated caption variants to encode instead of manifest captions")
    p.add_argument("--model", required=True, help=f"one of: {', '.join(sorted(SUPPORTED_TAGS))}")
    p.add_argument("--out-images", dest="out_images", metavar="EMB1")
    p.add_argument("--out-texts", dest="out_texts", metavar="EMB1")
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.add_argument("--image-root", dest="image_root",
                   help="base directory for manifest image paths (default: manifest directory)")
    p.add_argument("--on-missing", choices=("fail", "skip"), default="fail", dest="on_missing")
    p.add_argument("--stub", action="store_true",
                   help="deterministic hash encoder instead of model weights (testing)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ExportError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
