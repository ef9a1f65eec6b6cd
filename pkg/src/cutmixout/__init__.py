"""Test-time caption augmentation, embedding fusion, exhaustive gallery
retrieval and CMC(k) evaluation for multimodal person re-identification."""

__version__ = "0.1.0"

from .augment import (
    AugmentationConfig,
    BinaryMask,
    Caption,
    SegmentationStrategy,
    SegmentedCaption,
    Variant,
    cutmix,
    cutmixout,
    cutout,
    gen_mask,
    segment,
)
from .embed import (
    EmbeddingProvider,
    JointEmbedding,
    MockProvider,
    aggregate,
    fuse,
    mock_embed,
    project,
)
from .errors import DataError, EmbeddingFormatError
from .evaluate import EvalReport, ProtocolConfig, Query, cmc, evaluate_protocol
from .retrieve import (
    GalleryEntry,
    GalleryIndex,
    RankedList,
    build_index,
    rank_of_match,
    search,
)

__all__ = [
    "AugmentationConfig",
    "BinaryMask",
    "Caption",
    "DataError",
    "EmbeddingFormatError",
    "EmbeddingProvider",
    "EvalReport",
    "GalleryEntry",
    "GalleryIndex",
    "JointEmbedding",
    "MockProvider",
    "ProtocolConfig",
    "Query",
    "RankedList",
    "SegmentationStrategy",
    "SegmentedCaption",
    "Variant",
    "aggregate",
    "build_index",
    "cmc",
    "cutmix",
    "cutmixout",
    "cutout",
    "evaluate_protocol",
    "fuse",
    "gen_mask",
    "mock_embed",
    "project",
    "rank_of_match",
    "search",
    "segment",
]
