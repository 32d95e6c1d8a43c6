"""Weighted Reciprocal Rank Fusion of retriever outputs.

Each document scores sum(w_i / (rank_i + 60)) over the retrievers that
returned it, with 1-based ranks; documents missing from a retriever get
no contribution from it. The rank offset 60 is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chunking import CodeChunk
from .dense import EmbeddingProvider, VectorIndex, dense_top_k
from .ranking import RankedList
from .sparse import Bm25Params, TermIndex, sparse_top_k

RANK_OFFSET = 60


@dataclass(frozen=True)
class FusionConfig:
    """Per-retriever weights; defaults favor the dense retriever."""

    weights: tuple[float, ...] = (0.3, 0.7)

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one weight must be positive")


def rrf_fuse(lists: list[RankedList], config: FusionConfig = FusionConfig()) -> RankedList:
    """Fuse ranked lists into one deduplicated list, descending RRF score."""
    if len(lists) != len(config.weights):
        raise ValueError(
            f"got {len(lists)} lists but {len(config.weights)} weights"
        )
    scores: dict[str, float] = {}
    for weight, ranked in zip(config.weights, lists):
        for rank, (doc_id, _) in enumerate(ranked.entries, start=1):
            scores[doc_id] = scores.get(doc_id, 0.0) + weight / (rank + RANK_OFFSET)
    return RankedList.from_scores(scores)


def retrieve_context(
    query: str,
    k_per_retriever: int,
    sparse_index: TermIndex,
    vector_index: VectorIndex,
    provider: EmbeddingProvider,
    chunks_by_id: dict[str, CodeChunk],
    config: FusionConfig = FusionConfig(),
    bm25_params: Bm25Params = Bm25Params(),
    exclude_doc_ids: frozenset[str] | set[str] = frozenset(),
) -> list[CodeChunk]:
    """Run both retrievers, fuse, and return chunks in fused order.

    ``exclude_doc_ids`` is the leakage guard: chunks overlapping the
    ground-truth target span are filtered out of both ranked lists
    before fusion (extra candidates are requested so each retriever
    still contributes up to k documents).
    """
    if k_per_retriever < 1:
        raise ValueError("k_per_retriever must be >= 1")
    request_k = k_per_retriever + len(exclude_doc_ids)
    ranked_lists = []
    for ranked in (
        sparse_top_k(query, request_k, sparse_index, bm25_params),
        dense_top_k(query, request_k, vector_index, provider),
    ):
        kept = tuple(
            (doc_id, score) for doc_id, score in ranked.entries
            if doc_id not in exclude_doc_ids
        )[:k_per_retriever]
        ranked_lists.append(RankedList(entries=kept))
    fused = rrf_fuse(ranked_lists, config)
    return [chunks_by_id[doc_id] for doc_id in fused.doc_ids() if doc_id in chunks_by_id]
