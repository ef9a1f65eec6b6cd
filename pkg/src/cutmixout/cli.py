"""Command-line entry point.

Subcommands:
    augment        captions JSONL -> augmented variants JSONL
    index          build/validate a gallery index from EMB1, optionally search
    evaluate       CMC report from gallery/query EMB1 files + manifests
    pipeline-mock  full in-process pipeline with the deterministic mock embedder

Exit codes: 0 success, 2 usage error, 3 data/validation error, 4 IO error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from . import __version__
from .augment import (
    AugmentationConfig,
    Caption,
    SegmentationStrategy,
    cutmixout,
    original_variant,
)
from .dataset import (
    MANIFEST_SCHEMA,
    ManifestRecord,
    attributes_to_caption,
    load_embedding_map,
    load_manifest,
)
from .embed import MockProvider, aggregate, fuse
from .errors import DataError
from .evaluate import EvalReport, ProtocolConfig, Query, evaluate_protocol
from .retrieve import (
    METRIC_COSINE,
    METRICS,
    GalleryEntry,
    build_index,
    search,
)

MODE_MM = "mm"
MODE_TEXT = "text"
MODE_IMAGE = "image"
MODES = (MODE_MM, MODE_TEXT, MODE_IMAGE)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4


# ---------------------------------------------------------------------------
# mock pipeline (augment -> embed -> fuse -> index -> evaluate, in-process)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MockPipelineConfig:
    dim: int = 64
    mode: str = MODE_MM
    metric: str = METRIC_COSINE
    ks: tuple[int, ...] = (1, 5, 10, 20)
    k: int = 8  # 0 disables augmentation (baseline)
    p_mix: float = 0.5
    max_mask_fraction: float = 0.5
    strategy: str = "punctuation"
    window: int = 3
    cutout_policy: str = "delete"
    special_token: str = "[MASK]"
    seed: int = 0
    include_original: bool = True
    exclude_self: bool = True
    exclude_same_camera: bool = False

    def augmentation(self) -> AugmentationConfig:
        return AugmentationConfig(
            p_mix=self.p_mix,
            p_out=1.0 - self.p_mix,
            k=max(self.k, 1),
            max_mask_fraction=self.max_mask_fraction,
            cutout_policy=self.cutout_policy,
            special_token=self.special_token,
            strategy=SegmentationStrategy(kind=self.strategy, window=self.window),
            seed=self.seed,
        )

    def snapshot(self) -> dict:
        return {
            "dim": self.dim, "mode": self.mode, "metric": self.metric,
            "ks": list(self.ks), "k": self.k, "p_mix": self.p_mix,
            "max_mask_fraction": self.max_mask_fraction,
            "strategy": self.strategy, "window": self.window,
            "cutout_policy": self.cutout_policy, "special_token": self.special_token,
            "seed": self.seed, "include_original": self.include_original,
            "exclude_self": self.exclude_self,
            "exclude_same_camera": self.exclude_same_camera,
        }


def _record_caption(record: ManifestRecord) -> Caption | None:
    if record.captions:
        return Caption(id=record.entry_id, text=record.captions[0])
    if record.attributes:
        return attributes_to_caption(record.attributes, caption_id=record.entry_id)
    return None


def _joint_for_record(
    record: ManifestRecord,
    provider: MockProvider,
    cfg: MockPipelineConfig,
    augment_text: bool,
):
    """Joint embedding of one manifest record; query side augments text.

    Both sides embed segment-normalized text (the identity-mask rendering),
    so gallery tokens and variant tokens follow one convention.
    """
    text_half = None
    if cfg.mode in (MODE_MM, MODE_TEXT):
        caption = _record_caption(record)
        if caption is None:
            raise DataError(
                f"no captions for {cfg.mode} mode (entry {record.entry_id!r})"
            )
        aug = cfg.augmentation()
        identity = original_variant(caption, aug.strategy)
        if augment_text and cfg.k >= 1:
            variants = cutmixout(caption, aug)
            pool = ([identity] if cfg.include_original else []) + variants
        else:
            pool = [identity]
        text_half = aggregate(provider.embed_text(pool), normalize=True)
    image_half = None
    if cfg.mode in (MODE_MM, MODE_IMAGE):
        image_half = provider.embed_image([record.image_path])[0]
    return fuse(text_half, image_half)


def run_mock_pipeline(
    gallery_records: list[ManifestRecord],
    query_records: list[ManifestRecord],
    cfg: MockPipelineConfig,
) -> EvalReport:
    """Run the full retrieval pipeline with the mock provider.

    Gallery captions are embedded as-is; query captions are augmented and
    aggregated. Deterministic for fixed inputs and config.
    """
    if cfg.mode not in MODES:
        raise DataError(f"unknown mode {cfg.mode!r}, expected one of {MODES}")
    provider = MockProvider(dim_text=cfg.dim, dim_image=cfg.dim, seed=cfg.seed)

    entries = [
        GalleryEntry(
            entry_id=r.entry_id,
            person_id=r.person_id,
            camera_id=r.camera_id,
            embedding=_joint_for_record(r, provider, cfg, augment_text=False),
        )
        for r in gallery_records
    ]
    index = build_index(entries, metric=cfg.metric)

    queries = [
        Query(
            query_id=r.entry_id,
            person_id=r.person_id,
            camera_id=r.camera_id,
            embedding=_joint_for_record(r, provider, cfg, augment_text=True),
        )
        for r in query_records
    ]
    protocol = ProtocolConfig(
        ks=cfg.ks,
        exclude_same_camera=cfg.exclude_same_camera,
        exclude_self=cfg.exclude_self,
    )
    return evaluate_protocol(queries, index, protocol)


# ---------------------------------------------------------------------------
# report/output helpers
# ---------------------------------------------------------------------------


def _write_report(report: EvalReport, out_path: str, csv_path: str | None, extra: dict) -> None:
    doc = report.to_dict()
    doc["config"].update(extra)
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as f:
            f.write("k,cmc\n")
            for k, value in report.cmc_rows():
                f.write(f"{k},{value}\n")


def _read_captions_jsonl(path: str) -> list[Caption]:
    captions = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON ({e.msg})") from e
            if "id" not in obj or "text" not in obj:
                raise DataError(f"{path}:{lineno}: caption objects need 'id' and 'text'")
            try:
                captions.append(Caption(id=str(obj["id"]), text=str(obj["text"])))
            except DataError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
    if not captions:
        raise DataError(f"{path}: no captions")
    return captions


def _parse_ks(raw: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in raw.split(","))
    except ValueError:
        raise DataError(f"--ks must be comma-separated integers, got {raw!r}")
    return ks


def _entries_from_files(emb_path: str, meta_path: str) -> list[GalleryEntry]:
    by_id, dim = load_embedding_map(emb_path)
    records = load_manifest(meta_path)
    entries = []
    for r in records:
        if r.entry_id not in by_id:
            raise DataError(f"{emb_path}: no embedding for entry {r.entry_id!r}")
        entries.append(
            GalleryEntry(
                entry_id=r.entry_id,
                person_id=r.person_id,
                camera_id=r.camera_id,
                embedding=by_id[r.entry_id].astype("float64"),
            )
        )
    return entries


def _queries_from_files(emb_path: str, meta_path: str) -> list[Query]:
    by_id, dim = load_embedding_map(emb_path)
    records = load_manifest(meta_path)
    queries = []
    for r in records:
        if r.entry_id not in by_id:
            raise DataError(f"{emb_path}: no embedding for query {r.entry_id!r}")
        queries.append(
            Query(
                query_id=r.entry_id,
                person_id=r.person_id,
                camera_id=r.camera_id,
                embedding=by_id[r.entry_id].astype("float64"),
            )
        )
    return queries


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_augment(args) -> int:
    strategy = SegmentationStrategy(kind=args.strategy, window=args.window)
    cfg = AugmentationConfig(
        p_mix=args.p_mix,
        p_out=1.0 - args.p_mix,
        k=args.k,
        max_mask_fraction=args.max_mask_fraction,
        cutout_policy=args.cutout_policy,
        special_token=args.special_token,
        strategy=strategy,
        seed=args.seed,
    )
    captions = _read_captions_jsonl(args.in_path)
    with open(args.out, "w", encoding="utf-8") as f:
        for caption in captions:
            rows = []
            if args.include_original:
                rows.append(original_variant(caption, strategy))
            rows.extend(cutmixout(caption, cfg))
            for v in rows:
                f.write(
                    json.dumps(
                        {
                            "id": v.id,
                            "text": v.text,
                            "parent_id": v.parent_id,
                            "variant_index": v.variant_index,
                            "op": v.op,
                        }
                    )
                    + "\n"
                )
    return EXIT_OK


def cmd_index(args) -> int:
    if args.top_k < 1:
        raise DataError(f"--top-k must be >= 1, got {args.top_k}")
    entries = _entries_from_files(args.gallery, args.gallery_meta)
    index = build_index(entries, metric=args.metric)
    print(f"index: {index.size} entries, dim {index.dim}, metric {index.metric}")
    if args.queries:
        if not args.queries_meta:
            raise DataError("--queries requires --queries-meta")
        queries = _queries_from_files(args.queries, args.queries_meta)
        with open(args.out, "w", encoding="utf-8") as f:
            for q in queries:
                ranked = search(index, q.embedding, top_k=args.top_k, query_id=q.query_id)
                f.write(
                    json.dumps(
                        {
                            "query_id": ranked.query_id,
                            "hits": [
                                {"entry_id": e, "person_id": p, "distance": d}
                                for e, p, d in ranked.hits
                            ],
                        }
                    )
                    + "\n"
                )
        print(f"wrote {len(queries)} ranked lists to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ks = _parse_ks(args.ks)
    protocol = ProtocolConfig(
        ks=ks,
        exclude_same_camera=args.exclude_same_camera,
        exclude_self=args.exclude_self,
    )
    entries = _entries_from_files(args.gallery, args.gallery_meta)
    index = build_index(entries, metric=args.metric)
    queries = _queries_from_files(args.queries, args.queries_meta)
    report = evaluate_protocol(queries, index, protocol)
    csv_path = args.csv or _default_csv_path(args.out)
    _write_report(report, args.out, csv_path, {"command": "evaluate"})
    for k, value in report.cmc_rows():
        print(f"cmc({k}) = {value:.4f}")
    return EXIT_OK


def cmd_pipeline_mock(args) -> int:
    cfg = MockPipelineConfig(
        dim=args.dim,
        mode=args.mode,
        metric=args.metric,
        ks=_parse_ks(args.ks),
        k=args.k,
        p_mix=args.p_mix,
        max_mask_fraction=args.max_mask_fraction,
        strategy=args.strategy,
        window=args.window,
        cutout_policy=args.cutout_policy,
        special_token=args.special_token,
        seed=args.seed,
        include_original=args.include_original,
        exclude_self=args.exclude_self,
        exclude_same_camera=args.exclude_same_camera,
    )
    if cfg.k < 0:
        raise DataError(f"--k must be >= 0, got {cfg.k}")
    # fail on bad flag combinations before touching any file
    cfg.augmentation()
    ProtocolConfig(ks=cfg.ks, exclude_same_camera=cfg.exclude_same_camera,
                   exclude_self=cfg.exclude_self)
    gallery = load_manifest(args.gallery)
    queries = load_manifest(args.queries)
    report = run_mock_pipeline(gallery, queries, cfg)
    csv_path = args.csv or _default_csv_path(args.out)
    _write_report(report, args.out, csv_path, {"command": "pipeline-mock", "pipeline": cfg.snapshot()})
    for k, value in report.cmc_rows():
        print(f"cmc({k}) = {value:.4f}")
    return EXIT_OK


def _default_csv_path(out_path: str) -> str:
    return out_path[: -len(".json")] + ".csv" if out_path.endswith(".json") else out_path + ".csv"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_augment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=8, help="variants per caption")
    p.add_argument("--p-mix", type=float, default=0.5, dest="p_mix",
                   help="probability of cutmix per variant (cutout gets 1-p)")
    p.add_argument("--max-mask-fraction", type=float, default=0.5, dest="max_mask_fraction")
    p.add_argument("--strategy", choices=("punctuation", "fixed-window"), default="punctuation")
    p.add_argument("--window", type=int, default=3, help="words per segment for fixed windows")
    p.add_argument("--cutout-policy", choices=("delete", "special-token"),
                   default="delete", dest="cutout_policy")
    p.add_argument("--special-token", default="[MASK]", dest="special_token")
    p.add_argument("--seed", type=int, default=0)


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ks", default="1,5,10,20", help="comma-separated CMC cutoffs")
    p.add_argument("--metric", choices=METRICS, default=METRIC_COSINE)
    p.add_argument("--exclude-same-camera", action="store_true", dest="exclude_same_camera")
    p.add_argument("--exclude-self", action=argparse.BooleanOptionalAction,
                   default=True, dest="exclude_self")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutmixout",
        description="Caption augmentation, embedding fusion, retrieval and CMC evaluation.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"cutmixout {__version__} (formats: EMB1, {MANIFEST_SCHEMA})",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("augment", help="synthesize caption variants")
    p.add_argument("--in", required=True, dest="in_path", metavar="CAPTIONS_JSONL")
    p.add_argument("--out", required=True, metavar="VARIANTS_JSONL")
    _add_augment_flags(p)
    p.add_argument("--include-original", action=argparse.BooleanOptionalAction,
                   default=False, dest="include_original",
                   help="also emit the unmodified caption as variant 0")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("index", help="build a gallery index, optionally run top-k searches")
    p.add_argument("--gallery", required=True, metavar="EMB1")
    p.add_argument("--gallery-meta", required=True, dest="gallery_meta", metavar="JSONL")
    p.add_argument("--metric", choices=METRICS, default=METRIC_COSINE)
    p.add_argument("--queries", metavar="EMB1")
    p.add_argument("--queries-meta", dest="queries_meta", metavar="JSONL")
    p.add_argument("--top-k", type=int, default=10, dest="top_k")
    p.add_argument("--out", default="hits.jsonl", metavar="JSONL")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("evaluate", help="CMC report from embedding files")
    p.add_argument("--gallery", required=True, metavar="EMB1")
    p.add_argument("--gallery-meta", required=True, dest="gallery_meta", metavar="JSONL")
    p.add_argument("--queries", required=True, metavar="EMB1")
    p.add_argument("--queries-meta", required=True, dest="queries_meta", metavar="JSONL")
    p.add_argument("--out", required=True, metavar="REPORT_JSON")
    p.add_argument("--csv", metavar="REPORT_CSV")
    _add_protocol_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline-mock", help="full pipeline with the mock embedder")
    p.add_argument("--gallery", required=True, metavar="MANIFEST_JSONL")
    p.add_argument("--queries", required=True, metavar="MANIFEST_JSONL")
    p.add_argument("--out", required=True, metavar="REPORT_JSON")
    p.add_argument("--csv", metavar="REPORT_CSV")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--mode", choices=MODES, default=MODE_MM)
    _add_augment_flags(p)
    p.add_argument("--include-original", action=argparse.BooleanOptionalAction,
                   default=True, dest="include_original",
                   help="include the unmodified caption in the aggregation")
    _add_protocol_flags(p)
    p.set_defaults(func=cmd_pipeline_mock)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
