"""Run configuration, content-addressed caching, and the context engine.

Cache keys are content hashes over the chunk manifest plus the config
fields that affect the cached artifact, so staleness detection is
exact: edit a file and the chunk-derived entries miss, while unrelated
entries survive.
"""

from __future__ import annotations

import hashlib
import json
import logging
import pickle
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from filelock import FileLock

from .chunking import (
    PROFILES,
    CodeChunk,
    chunk_manifest_bytes,
    chunk_repository,
)
from .dense import (
    EmbeddingProvider,
    HashEmbeddingProvider,
    HttpEmbeddingProvider,
    VectorIndex,
    build_vector_index,
)
from .fusion import FusionConfig, retrieve_context
from .generation import DEFAULT_PROMPT_BUDGET, GenerationTask
from .sparse import Bm25Params, TermIndex, build_index
from .typectx import (
    DEFAULT_TYPE_CONTEXT_BUDGET,
    AnalyzerSession,
    expand_direct_neighbors,
    prune_stdlib,
    render_type_context,
    seed_types,
)

logger = logging.getLogger(__name__)

# per-language defaults for chunk size and per-retriever k
PROFILE_DEFAULTS = {
    "java": {"max_chunk_size": 2000, "k_per_retriever": 4},
    "rust": {"max_chunk_size": 1000, "k_per_retriever": 8},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    repo_root: Path
    language: str = "java"
    max_chunk_size: int | None = None
    k_per_retriever: int | None = None
    fusion_weights: tuple[float, float] = (0.3, 0.7)
    prompt_budget: int = DEFAULT_PROMPT_BUDGET
    type_context_budget: int = DEFAULT_TYPE_CONTEXT_BUDGET
    embedding_url: str | None = None
    embedding_dimension: int = 64
    generation_url: str | None = None
    cache_dir: Path | None = None
    analyzer_manifest: Path | None = None

    def __post_init__(self):
        if self.language not in PROFILES:
            raise ConfigError(f"unknown language profile: {self.language}")
        if self.max_chunk_size is not None and self.max_chunk_size < 1:
            raise ConfigError("max_chunk_size must be positive")
        FusionConfig(weights=self.fusion_weights)  # validates

    @property
    def profile(self):
        return PROFILES[self.language]

    @property
    def chunk_size(self) -> int:
        return self.max_chunk_size or PROFILE_DEFAULTS[self.language]["max_chunk_size"]

    @property
    def retriever_k(self) -> int:
        return self.k_per_retriever or PROFILE_DEFAULTS[self.language]["k_per_retriever"]

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        try:
            return cls(
                repo_root=Path(data["repo_root"]),
                language=data.get("language", "java"),
                max_chunk_size=data.get("max_chunk_size"),
                k_per_retriever=data.get("k_per_retriever"),
                fusion_weights=tuple(data.get("fusion_weights", (0.3, 0.7))),
                prompt_budget=data.get("prompt_budget", DEFAULT_PROMPT_BUDGET),
                type_context_budget=data.get(
                    "type_context_budget", DEFAULT_TYPE_CONTEXT_BUDGET),
                embedding_url=data.get("embedding_url"),
                embedding_dimension=data.get("embedding_dimension", 64),
                generation_url=data.get("generation_url"),
                cache_dir=Path(data["cache_dir"]) if data.get("cache_dir") else None,
                analyzer_manifest=Path(data["analyzer_manifest"])
                if data.get("analyzer_manifest") else None,
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field: {exc}") from exc


@dataclass(frozen=True)
class CacheEntry:
    key: str
    kind: str  # sparse_index | vector_index | analyzer_state
    payload_path: Path
    created_at: float


class Cache:
    """Content-addressed pickle store guarded by an advisory lock."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = FileLock(str(self.directory / ".lock"))

    @staticmethod
    def key_for(kind: str, *parts: bytes) -> str:
        digest = hashlib.sha256()
        digest.update(kind.encode("utf-8"))
        for part in parts:
            digest.update(b"\x00")
            digest.update(part)
        return digest.hexdigest()

    def _payload_path(self, key: str, kind: str) -> Path:
        return self.directory / f"{key}.{kind}.pkl"

    def get(self, key: str, kind: str):
        path = self._payload_path(key, kind)
        with self._lock:
            if not path.is_file():
                return None
            with open(path, "rb") as fh:
                return pickle.load(fh)

    def put(self, key: str, kind: str, value) -> CacheEntry:
        path = self._payload_path(key, kind)
        with self._lock:
            with open(path, "wb") as fh:
                pickle.dump(value, fh)
            meta = CacheEntry(key=key, kind=kind, payload_path=path,
                              created_at=time.time())
            with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
                json.dump({"key": key, "kind": kind,
                           "created_at": meta.created_at}, fh)
        return meta

    def entries(self) -> list[CacheEntry]:
        out = []
        with self._lock:
            for meta_path in sorted(self.directory.glob("*.json")):
                data = json.loads(meta_path.read_text(encoding="utf-8"))
                out.append(CacheEntry(
                    key=data["key"], kind=data["kind"],
                    payload_path=meta_path.with_suffix(".pkl"),
                    created_at=data["created_at"],
                ))
        return out

    def clear(self) -> int:
        removed = 0
        with self._lock:
            for path in self.directory.glob("*.pkl"):
                path.unlink()
                removed += 1
            for path in self.directory.glob("*.json"):
                path.unlink()
        return removed


def default_provider(config: RunConfig) -> EmbeddingProvider:
    if config.embedding_url:
        return HttpEmbeddingProvider(config.embedding_url,
                                     dimension=config.embedding_dimension)
    return HashEmbeddingProvider(dimension=config.embedding_dimension)


class ContextEngine:
    """Assembles retrieval and type-context inputs for prompt building.

    Index construction goes through the cache when a cache directory is
    configured; ``timings`` and ``cache_hits`` record the per-component
    breakdown of the last ensure_indexes call.
    """

    def __init__(
        self,
        config: RunConfig,
        provider: EmbeddingProvider | None = None,
        analyzer: AnalyzerSession | None = None,
    ):
        self.config = config
        self.provider = provider or default_provider(config)
        self.analyzer = analyzer
        if self.analyzer is None and config.analyzer_manifest:
            from .typectx import FixtureAnalyzerSession
            self.analyzer = FixtureAnalyzerSession(config.analyzer_manifest)
        if self.analyzer is not None:
            self.analyzer.open(config.repo_root)
        self.cache = Cache(config.cache_dir) if config.cache_dir else None
        self.chunks: list[CodeChunk] | None = None
        self.chunks_by_id: dict[str, CodeChunk] = {}
        self.sparse_index: TermIndex | None = None
        self.vector_index: VectorIndex | None = None
        self.timings: dict[str, float] = {}
        self.cache_hits: dict[str, bool] = {}
        self._graph_cache: dict[str, str] = {}

    # -- indexing ---------------------------------------------------------

    def ensure_chunks(self) -> list[CodeChunk]:
        if self.chunks is None:
            start = time.perf_counter()
            self.chunks = chunk_repository(
                self.config.repo_root, self.config.profile, self.config.chunk_size)
            self.chunks_by_id = {c.doc_id: c for c in self.chunks}
            self.timings["chunking"] = time.perf_counter() - start
        return self.chunks

    def _cached_build(self, kind: str, key: str, builder):
        if self.cache is not None:
            value = self.cache.get(key, kind)
            if value is not None:
                self.cache_hits[kind] = True
                return value
        self.cache_hits[kind] = False
        value = builder()
        if self.cache is not None:
            self.cache.put(key, kind, value)
        return value

    def ensure_indexes(self) -> None:
        chunks = self.ensure_chunks()
        manifest = chunk_manifest_bytes(chunks)
        texts_digest = hashlib.sha256()
        for c in chunks:
            texts_digest.update(c.text.encode("utf-8"))
        content = texts_digest.digest()

        start = time.perf_counter()
        sparse_key = Cache.key_for("sparse_index", manifest, content)
        self.sparse_index = self._cached_build(
            "sparse_index", sparse_key, lambda: build_index(chunks))
        self.timings["sparse_index"] = time.perf_counter() - start

        start = time.perf_counter()
        provider_tag = (
            f"{type(self.provider).__name__}:{self.provider.dimension}".encode())
        vector_key = Cache.key_for("vector_index", manifest, content, provider_tag)
        self.vector_index = self._cached_build(
            "vector_index", vector_key,
            lambda: build_vector_index(chunks, self.provider))
        self.timings["vector_index"] = time.perf_counter() - start

        if self.analyzer is not None and hasattr(self.analyzer, "dump_state"):
            start = time.perf_counter()
            analyzer_key = Cache.key_for(
                "analyzer_state", content, self.config.language.encode())
            state = self._cached_build(
                "analyzer_state", analyzer_key, self.analyzer.dump_state)
            if self.cache_hits.get("analyzer_state") and hasattr(self.analyzer, "load_state"):
                self.analyzer.load_state(state)
            self.timings["analyzer_state"] = time.perf_counter() - start

    # -- ContextProvider surface -----------------------------------------

    def prompt_budget(self) -> int:
        return self.config.prompt_budget

    def overlapping_doc_ids(self, task: GenerationTask) -> set[str]:
        """Chunks overlapping the ground-truth span (leakage guard)."""
        self.ensure_chunks()
        start, end = task.insertion_span
        return {
            c.doc_id for c in self.chunks
            if c.file_path == task.file_path
            and c.byte_range[0] < end and start < c.byte_range[1]
        }

    def retrieve(self, query: str, k: int | None, exclude: set[str]) -> list[CodeChunk]:
        self.ensure_indexes()
        return retrieve_context(
            query=query,
            k_per_retriever=k or self.config.retriever_k,
            sparse_index=self.sparse_index,
            vector_index=self.vector_index,
            provider=self.provider,
            chunks_by_id=self.chunks_by_id,
            config=FusionConfig(weights=self.config.fusion_weights),
            bm25_params=Bm25Params(),
            exclude_doc_ids=exclude,
        )

    def type_context_for(self, task: GenerationTask) -> str:
        if self.analyzer is None:
            return ""
        cache_key = f"{task.file_path}:{task.insertion_span[0]}:{task.signature}"
        if cache_key in self._graph_cache:
            return self._graph_cache[cache_key]
        seeds = seed_types(task, self.analyzer)
        graph = expand_direct_neighbors(seeds, self.analyzer)
        graph = prune_stdlib(graph, self.config.profile.stdlib_prefixes)
        enclosing = self.analyzer.resolve_type_at(
            task.file_path, task.insertion_span[0])
        private_ok = {enclosing.qualified_name} if enclosing else set()
        text = render_type_context(
            graph, budget=self.config.type_context_budget,
            private_member_types=private_ok)
        self._graph_cache[cache_key] = text
        return text


def cmd_index(config: RunConfig, provider=None, analyzer=None) -> dict:
    """Build (or reuse) all cached artifacts; report per-component timings."""
    engine = ContextEngine(config, provider=provider, analyzer=analyzer)
    engine.ensure_indexes()
    return {
        "chunks": len(engine.chunks or []),
        "timings": dict(engine.timings),
        "cache_hits": dict(engine.cache_hits),
    }
