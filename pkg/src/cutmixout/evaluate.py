"""CMC(k) evaluation over a query/gallery protocol.

For each query the gallery is filtered by the configured exclusions, fully
ranked, and the 1-based rank of the first correct match recorded. CMC(k) is
the fraction of evaluable queries with rank <= k. Queries whose correct
matches do not exist (or were all excluded) are dropped from the denominator
and listed separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embed import JointEmbedding, as_vector
from .errors import DataError
from .retrieve import GalleryIndex, pairwise_distances


@dataclass(frozen=True)
class ProtocolConfig:
    ks: tuple[int, ...] = (1, 5, 10, 20)
    exclude_same_camera: bool = False
    exclude_self: bool = True

    def __post_init__(self):
        if not self.ks:
            raise DataError("ks must be nonempty")
        if any(k < 1 for k in self.ks):
            raise DataError(f"ks must be positive, got {self.ks}")
        if any(a >= b for a, b in zip(self.ks, self.ks[1:])):
            raise DataError(f"ks must be strictly ascending, got {self.ks}")


@dataclass(frozen=True)
class Query:
    query_id: str
    person_id: str
    embedding: np.ndarray | JointEmbedding
    camera_id: str | None = None
    # gallery entry this query originated from; dropped when exclude_self is on
    source_entry_id: str | None = None

    @property
    def self_entry_id(self) -> str:
        return self.source_entry_id if self.source_entry_id is not None else self.query_id


@dataclass(frozen=True)
class EvalReport:
    per_query: tuple[tuple[str, int | None], ...]
    cmc: dict[int, float]
    n_queries: int  # evaluable queries (rank defined)
    unmatched: tuple[str, ...]  # queries with no feasible correct match
    empty_after_exclusion: tuple[str, ...]
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "cmc": {str(k): v for k, v in self.cmc.items()},
            "n_queries": self.n_queries,
            "per_query": [
                {"query_id": qid, "rank": rank} for qid, rank in self.per_query
            ],
            "unmatched": list(self.unmatched),
            "empty_after_exclusion": list(self.empty_after_exclusion),
            "config": self.config,
        }

    def cmc_rows(self) -> list[tuple[int, float]]:
        return sorted(self.cmc.items())


def cmc(ranks: Sequence[int], k: int) -> float:
    """Fraction of ranks <= k."""
    if len(ranks) == 0:
        raise DataError("cmc requires at least one rank")
    if k < 1:
        raise DataError(f"k must be positive, got {k}")
    return sum(1 for r in ranks if r <= k) / len(ranks)


def evaluate_protocol(
    queries: Sequence[Query],
    index: GalleryIndex,
    cfg: ProtocolConfig | None = None,
) -> EvalReport:
    """Rank every query against the gallery and tabulate CMC."""
    cfg = cfg or ProtocolConfig()
    if not queries:
        raise DataError("no queries to evaluate")

    entry_ids = np.asarray(index.entry_ids)
    person_ids = np.asarray(index.person_ids)
    camera_ids = np.asarray(index.camera_ids, dtype=object)

    per_query: list[tuple[str, int | None]] = []
    unmatched: list[str] = []
    empty_after_exclusion: list[str] = []
    ranks: list[int] = []

    for query in queries:
        emb = query.embedding
        if isinstance(emb, JointEmbedding):
            emb = emb.values
        q = as_vector(emb, f"query {query.query_id!r}")
        if q.shape[0] != index.dim:
            raise DataError(
                f"query {query.query_id!r} dim {q.shape[0]} does not match "
                f"index dim {index.dim}"
            )

        keep = np.ones(index.size, dtype=bool)
        if cfg.exclude_self:
            keep &= entry_ids != query.self_entry_id
        if cfg.exclude_same_camera and query.camera_id is not None:
            keep &= camera_ids != query.camera_id

        if not np.any(keep):
            empty_after_exclusion.append(query.query_id)
            per_query.append((query.query_id, None))
            continue

        distances = pairwise_distances(index.matrix, q, index.metric)
        kept_idx = np.nonzero(keep)[0]
        order = kept_idx[np.lexsort((entry_ids[kept_idx], distances[kept_idx]))]

        matches = np.nonzero(person_ids[order] == query.person_id)[0]
        rank = int(matches[0]) + 1 if matches.size else None

        per_query.append((query.query_id, rank))
        if rank is None:
            unmatched.append(query.query_id)
        else:
            ranks.append(rank)

    if ranks:
        table = {k: cmc(ranks, k) for k in cfg.ks}
    else:
        table = {k: 0.0 for k in cfg.ks}

    return EvalReport(
        per_query=tuple(per_query),
        cmc=table,
        n_queries=len(ranks),
        unmatched=tuple(unmatched),
        empty_after_exclusion=tuple(empty_after_exclusion),
        config={
            "ks": list(cfg.ks),
            "exclude_same_camera": cfg.exclude_same_camera,
            "exclude_self": cfg.exclude_self,
            "metric": index.metric,
            "gallery_size": index.size,
            "dim": index.dim,
        },
    )
