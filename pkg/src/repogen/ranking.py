"""Shared ranked-list type used by both retrievers and the fuser."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class RankedList:
    """Ordered (doc_id, score) pairs, descending score.

    Ties are broken by ascending doc_id. Each doc_id appears at most
    once; rank is 1-based position.
    """

    entries: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [doc_id for doc_id, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate doc_id in ranked list")

    @classmethod
    def from_scores(cls, scores: dict[str, float], k: int | None = None) -> "RankedList":
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(entries=tuple(ordered))

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def rank_of(self, doc_id: str) -> int | None:
        """1-based rank, or None if absent."""
        for i, (d, _) in enumerate(self.entries, start=1):
            if d == doc_id:
                return i
        return None

    def __len__(self) -> int:
        return len(self.entries)
