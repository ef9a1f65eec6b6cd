"""Immutable gallery index with exact top-k nearest-neighbor search.

Search is an exhaustive scan: all distances are computed, then sorted with a
deterministic tie-break (ascending entry_id). Supports cosine and euclidean
distances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embed import JointEmbedding, as_vector
from .errors import DataError

METRIC_COSINE = "cosine"
METRIC_EUCLIDEAN = "euclidean"
METRICS = (METRIC_COSINE, METRIC_EUCLIDEAN)


@dataclass(frozen=True)
class GalleryEntry:
    entry_id: str
    person_id: str
    embedding: np.ndarray | JointEmbedding
    camera_id: str | None = None


@dataclass(frozen=True)
class RankedList:
    """Hits ordered by ascending distance, ties broken by ascending entry_id."""

    query_id: str
    hits: tuple[tuple[str, str, float], ...]  # (entry_id, person_id, distance)


@dataclass(frozen=True)
class GalleryIndex:
    entry_ids: tuple[str, ...]
    person_ids: tuple[str, ...]
    camera_ids: tuple[str | None, ...]
    matrix: np.ndarray  # (N, dim)
    metric: str

    @property
    def size(self) -> int:
        return len(self.entry_ids)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def _entry_vector(entry: GalleryEntry) -> np.ndarray:
    emb = entry.embedding
    if isinstance(emb, JointEmbedding):
        emb = emb.values
    return as_vector(emb, f"embedding of entry {entry.entry_id!r}")


def build_index(entries: Sequence[GalleryEntry], metric: str = METRIC_COSINE) -> GalleryIndex:
    """Build an immutable exhaustive-search index over the gallery."""
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}, expected one of {METRICS}")
    if not entries:
        raise DataError("gallery must not be empty")
    seen: set[str] = set()
    vectors = []
    for e in entries:
        if e.entry_id in seen:
            raise DataError(f"duplicate gallery entry_id {e.entry_id!r}")
        seen.add(e.entry_id)
        vectors.append(_entry_vector(e))
    dim = vectors[0].shape[0]
    for e, v in zip(entries, vectors):
        if v.shape[0] != dim:
            raise DataError(
                f"gallery dimension mismatch: entry {e.entry_id!r} has dim "
                f"{v.shape[0]}, expected {dim}"
            )
    matrix = np.stack(vectors)
    if metric == METRIC_COSINE and np.any(np.linalg.norm(matrix, axis=1) == 0.0):
        raise DataError("cosine index cannot contain zero-norm embeddings")
    matrix.setflags(write=False)
    return GalleryIndex(
        entry_ids=tuple(e.entry_id for e in entries),
        person_ids=tuple(e.person_id for e in entries),
        camera_ids=tuple(e.camera_id for e in entries),
        matrix=matrix,
        metric=metric,
    )


def pairwise_distances(matrix: np.ndarray, query: np.ndarray, metric: str) -> np.ndarray:
    """Distances from one query to every row of the gallery matrix."""
    if metric == METRIC_COSINE:
        qnorm = float(np.linalg.norm(query))
        if qnorm == 0.0:
            raise DataError("cosine distance undefined for zero-norm query")
        row_norms = np.linalg.norm(matrix, axis=1)
        return 1.0 - (matrix @ query) / (row_norms * qnorm)
    diff = matrix - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def ranked_order(index: GalleryIndex, distances: np.ndarray) -> np.ndarray:
    """Indices sorted by (distance, entry_id) ascending."""
    ids = np.asarray(index.entry_ids)
    return np.lexsort((ids, distances))


def search(
    index: GalleryIndex,
    query: np.ndarray | JointEmbedding,
    top_k: int,
    query_id: str = "query",
) -> RankedList:
    """Exact top-k search; returns min(top_k, N) hits."""
    if top_k < 1:
        raise DataError(f"top_k must be >= 1, got {top_k}")
    if isinstance(query, JointEmbedding):
        query = query.values
    q = as_vector(query, "query")
    if q.shape[0] != index.dim:
        raise DataError(f"query dim {q.shape[0]} does not match index dim {index.dim}")
    distances = pairwise_distances(index.matrix, q, index.metric)
    order = ranked_order(index, distances)[: min(top_k, index.size)]
    hits = tuple(
        (index.entry_ids[i], index.person_ids[i], float(distances[i])) for i in order
    )
    return RankedList(query_id=query_id, hits=hits)


def rank_of_match(ranked: RankedList, query_person_id: str) -> int | None:
    """1-based position of the first hit matching the person id, or None."""
    for pos, (_, person_id, _) in enumerate(ranked.hits, start=1):
        if person_id == query_person_id:
            return pos
    return None
