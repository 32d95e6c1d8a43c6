"""Dense retrieval: pluggable embedding providers and an exact k-NN scan.

Proximity is squared Euclidean distance; ranked lists store the negated
distance as the score so "higher is better" holds for fusion. The scan
is exhaustive on purpose: repository-scale corpora are small enough and
exactness keeps the oracle tests trivial.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .chunking import CodeChunk
from .ranking import RankedList

logger = logging.getLogger(__name__)


class EmbeddingError(RuntimeError):
    """Provider failure; carries the batch that failed for retries."""

    def __init__(self, message: str, batch: list[str]):
        super().__init__(message)
        self.batch = batch


class EmbeddingProvider(Protocol):
    dimension: int

    def embed_batch(self, texts: list[str]) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Deterministic local stub: hashes text to a seeded random vector.

    Identical text always maps to an identical vector, which is all the
    tests and the cache-speedup fixtures need from an embedding model.
    """

    def __init__(self, dimension: int = 64):
        self.dimension = dimension

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
            rng = np.random.default_rng(seed)
            out[i] = rng.standard_normal(self.dimension)
        return out


class HttpEmbeddingProvider:
    """Client for an embedding endpoint.

    Wire contract: POST {"texts": [...]} -> {"vectors": [[...], ...]}
    with one equal-length vector per input text.
    """

    def __init__(self, url: str, dimension: int, batch_size: int = 32,
                 session: requests.Session | None = None, timeout: float = 60.0):
        self.url = url
        self.dimension = dimension
        self.batch_size = batch_size
        self.timeout = timeout
        self._session = session or requests.Session()

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        vectors: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start:start + self.batch_size]
            try:
                resp = self._session.post(self.url, json={"texts": batch}, timeout=self.timeout)
                resp.raise_for_status()
                payload = resp.json()["vectors"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                raise EmbeddingError(f"embedding request failed: {exc}", batch) from exc
            if len(payload) != len(batch):
                raise EmbeddingError("vector count mismatch", batch)
            vectors.extend(payload)
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.size and arr.shape[1] != self.dimension:
            raise EmbeddingError(f"unexpected dimension {arr.shape[1]}", texts)
        return arr.reshape((len(texts), self.dimension))


@dataclass
class VectorIndex:
    doc_ids: list[str]
    vectors: np.ndarray  # shape (len(doc_ids), dimension)

    def __post_init__(self):
        if len(self.doc_ids) != len(set(self.doc_ids)):
            raise ValueError("doc_ids must be unique")
        if len(self.doc_ids) != self.vectors.shape[0]:
            raise ValueError("doc_ids / vectors length mismatch")
        if self.vectors.size and not np.isfinite(self.vectors).all():
            raise ValueError("vectors must be finite")


def sq_euclidean(p: Sequence[float], q: Sequence[float]) -> float:
    """Sum of squared component differences."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    diff = p - q
    return float(diff @ diff)


def build_vector_index(chunks: list[CodeChunk], provider: EmbeddingProvider) -> VectorIndex:
    """Embed every chunk; one entry per chunk, in chunk order."""
    texts = [c.text for c in chunks]
    if not texts:
        return VectorIndex(doc_ids=[], vectors=np.empty((0, provider.dimension)))
    vectors = provider.embed_batch(texts)
    return VectorIndex(doc_ids=[c.doc_id for c in chunks], vectors=vectors)


def dense_top_k(
    query: str,
    k: int,
    index: VectorIndex,
    provider: EmbeddingProvider,
) -> RankedList:
    """Exact nearest neighbors, nearest first, ties by ascending doc_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.doc_ids:
        return RankedList()
    qv = provider.embed_batch([query])[0]
    if qv.shape[0] != index.vectors.shape[1]:
        raise ValueError("query/index dimension mismatch")
    diff = index.vectors - qv
    dists = np.einsum("ij,ij->i", diff, diff)
    scores = {doc_id: -float(d) for doc_id, d in zip(index.doc_ids, dists)}
    return RankedList.from_scores(scores, k=k)
