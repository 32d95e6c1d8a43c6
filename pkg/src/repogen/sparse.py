"""Bag-of-words BM25 index over code chunks.

IDF uses the natural logarithm and is not clamped, so rare-term scores
can go negative when a term appears in most documents; rank order is
what matters downstream.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .chunking import CodeChunk
from .ranking import RankedList

_WORD_RE = re.compile(r"[A-Za-z0-9_]+")
_CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|[0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased terms; identifiers split on camelCase/snake_case.

    Punctuation (including comment markers) is dropped; duplicates are
    preserved so term frequencies can be counted.
    """
    terms: list[str] = []
    for word in _WORD_RE.findall(text):
        for part in word.split("_"):
            if not part:
                continue
            terms.extend(m.lower() for m in _CAMEL_RE.findall(part))
    return terms


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0 <= self.b <= 1:
            raise ValueError("b must be in [0, 1]")


@dataclass
class TermIndex:
    doc_count: int
    doc_lengths: dict[str, int]
    avg_doc_length: float
    postings: dict[str, dict[str, int]]  # term -> {doc_id: tf}
    doc_freq: dict[str, int]


def build_index(chunks: list[CodeChunk]) -> TermIndex:
    """Build the term index; rebuilding from the same chunks is identical."""
    doc_ids = [c.doc_id for c in chunks]
    if len(doc_ids) != len(set(doc_ids)):
        raise ValueError("chunk doc_ids must be unique")
    doc_lengths: dict[str, int] = {}
    postings: dict[str, dict[str, int]] = {}
    for chunk in chunks:
        terms = tokenize(chunk.text)
        doc_lengths[chunk.doc_id] = len(terms)
        for term, tf in Counter(terms).items():
            postings.setdefault(term, {})[chunk.doc_id] = tf
    n = len(chunks)
    avg = (sum(doc_lengths.values()) / n) if n else 0.0
    doc_freq = {term: len(docs) for term, docs in postings.items()}
    return TermIndex(
        doc_count=n,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        postings=postings,
        doc_freq=doc_freq,
    )


def idf(term: str, index: TermIndex) -> float:
    """ln((N - DF + 0.5) / (DF + 0.5)); absent terms have DF = 0."""
    df = index.doc_freq.get(term, 0)
    return math.log((index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(
    query_terms: list[str],
    doc_id: str,
    index: TermIndex,
    params: Bm25Params = Bm25Params(),
) -> float:
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc_id: {doc_id}")
    doc_len = index.doc_lengths[doc_id]
    length_norm = params.k1 * (
        1 - params.b + params.b * doc_len / index.avg_doc_length
    ) if index.avg_doc_length > 0 else params.k1
    score = 0.0
    for term in query_terms:
        tf = index.postings.get(term, {}).get(doc_id, 0)
        if tf == 0:
            continue
        score += idf(term, index) * tf * (params.k1 + 1) / (tf + length_norm)
    return score


def sparse_top_k(
    query: str,
    k: int,
    index: TermIndex,
    params: Bm25Params = Bm25Params(),
) -> RankedList:
    """Top-k docs by BM25 over the tokenized query.

    Descending score, ties by ascending doc_id; scores <= 0 are kept
    because rank order is what fusion consumes.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query_terms = tokenize(query)
    scores = {
        doc_id: bm25_score(query_terms, doc_id, index, params)
        for doc_id in index.doc_lengths
    }
    return RankedList.from_scores(scores, k=k)
