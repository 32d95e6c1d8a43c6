"""Type context extraction via a static-analyzer session.

Starting from the target function's enclosing type and the types named
in its signature, the dependency graph is expanded one hop (direct
neighbors only), standard-library types are pruned, and the surviving
types are rendered as a textual context of fields and method
signatures.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .generation import GenerationTask

logger = logging.getLogger(__name__)

DEFAULT_TYPE_CONTEXT_BUDGET = 8_192

_TYPE_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.:]*")

# words that can never name a repository type in the supported languages
_NON_TYPE_WORDS = frozenset({
    "public", "protected", "private", "static", "final", "abstract", "native",
    "synchronized", "default", "void", "int", "long", "short", "byte", "char",
    "boolean", "float", "double", "throws", "pub", "fn", "mut", "self", "Self",
    "const", "unsafe", "async", "impl", "dyn", "ref", "where", "i8", "i16",
    "i32", "i64", "u8", "u16", "u32", "u64", "usize", "isize", "f32", "f64",
    "bool", "str", "String",
})


class TypeResolutionError(RuntimeError):
    """The enclosing type of a task could not be resolved."""


@dataclass(frozen=True)
class TypeInfo:
    """Shape of one repository type as reported by the analyzer.

    ``fields`` holds (name, declared type, visibility) triples;
    ``method_signatures`` are signature strings without bodies.
    """

    qualified_name: str
    kind: str  # class | interface | enum | struct | trait
    fields: tuple[tuple[str, str, str], ...] = ()
    method_signatures: tuple[str, ...] = ()
    origin: str = "repository"  # repository | standard-library | third-party

    @property
    def simple_name(self) -> str:
        return re.split(r"[.:]", self.qualified_name)[-1]


@dataclass
class TypeDependencyGraph:
    """Directed graph over types; edge (A, B) means A references B."""

    vertices: dict[str, TypeInfo] = field(default_factory=dict)
    edges: set[tuple[str, str]] = field(default_factory=set)
    depth: dict[str, int] = field(default_factory=dict)
    seeds: set[str] = field(default_factory=set)

    def add_vertex(self, info: TypeInfo, depth: int) -> None:
        if info.qualified_name not in self.vertices:
            self.vertices[info.qualified_name] = info
            self.depth[info.qualified_name] = depth

    def add_edge(self, src: str, dst: str) -> None:
        if src not in self.vertices or dst not in self.vertices:
            raise ValueError("edge endpoints must be graph vertices")
        self.edges.add((src, dst))


class AnalyzerSession(Protocol):
    """Interface to a static analyzer for one repository."""

    def open(self, repository_root: str | Path) -> None: ...

    def resolve_type_at(self, file_path: str, offset: int) -> TypeInfo | None: ...

    def resolve_type_name(self, name: str) -> TypeInfo | None: ...

    def types_referenced_by(self, info: TypeInfo) -> list[str]: ...


class FixtureAnalyzerSession:
    """In-memory analyzer backed by a JSON manifest, for tests.

    Manifest schema: {"types": {qualified_name: {"kind", "fields",
    "methods", "origin", "references", "file", "span"}}}. ``file`` and
    ``span`` locate the type's declaration for resolve_type_at.
    """

    def __init__(self, manifest: dict | str | Path):
        if not isinstance(manifest, dict):
            manifest = json.loads(Path(manifest).read_text(encoding="utf-8"))
        self._types: dict[str, TypeInfo] = {}
        self._references: dict[str, list[str]] = {}
        self._locations: dict[str, tuple[str, int, int]] = {}
        for name, spec in manifest["types"].items():
            self._types[name] = TypeInfo(
                qualified_name=name,
                kind=spec.get("kind", "class"),
                fields=tuple(tuple(f) for f in spec.get("fields", [])),
                method_signatures=tuple(spec.get("methods", [])),
                origin=spec.get("origin", "repository"),
            )
            self._references[name] = list(spec.get("references", []))
            if "file" in spec:
                start, end = spec.get("span", (0, 0))
                self._locations[name] = (spec["file"], start, end)
        self.root: Path | None = None

    def open(self, repository_root: str | Path) -> None:
        self.root = Path(repository_root)

    def resolve_type_at(self, file_path: str, offset: int) -> TypeInfo | None:
        for name, (path, start, end) in self._locations.items():
            if path == file_path and start <= offset < end:
                return self._types[name]
        return None

    def resolve_type_name(self, name: str) -> TypeInfo | None:
        if name in self._types:
            return self._types[name]
        matches = [
            info for info in self._types.values() if info.simple_name == name
        ]
        if len(matches) == 1:
            return matches[0]
        return None

    def types_referenced_by(self, info: TypeInfo) -> list[str]:
        return list(self._references.get(info.qualified_name, []))

    # warm-state hooks used by the cache layer
    def dump_state(self) -> dict:
        return {
            "types": self._types,
            "references": self._references,
            "locations": self._locations,
        }

    def load_state(self, state: dict) -> None:
        self._types = state["types"]
        self._references = state["references"]
        self._locations = state["locations"]


def _signature_type_names(signature: str) -> list[str]:
    names = []
    for token in _TYPE_NAME_RE.findall(signature):
        if token in _NON_TYPE_WORDS:
            continue
        names.append(token)
    return names


def seed_types(task: GenerationTask, session: AnalyzerSession) -> set[TypeInfo]:
    """Enclosing type of the target function plus signature types.

    Raises TypeResolutionError when the enclosing type cannot be
    resolved, since the task cannot proceed without it.
    """
    enclosing = session.resolve_type_at(task.file_path, task.insertion_span[0])
    if enclosing is None:
        raise TypeResolutionError(
            f"cannot resolve enclosing type of {task.task_id} "
            f"at {task.file_path}:{task.insertion_span[0]}"
        )
    seeds = {enclosing}
    for name in _signature_type_names(task.signature):
        info = session.resolve_type_name(name)
        if info is not None:
            seeds.add(info)
    return seeds


def expand_direct_neighbors(
    seeds: set[TypeInfo], session: AnalyzerSession
) -> TypeDependencyGraph:
    """Graph with seeds at depth 0 and their referenced types at depth 1.

    References the analyzer cannot resolve are logged and skipped; no
    vertex beyond distance 1 is added.
    """
    if not seeds:
        raise ValueError("seed set must be non-empty")
    graph = TypeDependencyGraph()
    for info in sorted(seeds, key=lambda t: t.qualified_name):
        graph.add_vertex(info, depth=0)
        graph.seeds.add(info.qualified_name)
    for info in sorted(seeds, key=lambda t: t.qualified_name):
        for name in session.types_referenced_by(info):
            ref = session.resolve_type_name(name)
            if ref is None:
                logger.debug("unresolved reference %s from %s", name, info.qualified_name)
                continue
            graph.add_vertex(ref, depth=1)
            graph.add_edge(info.qualified_name, ref.qualified_name)
    return graph


def prune_stdlib(
    graph: TypeDependencyGraph, stdlib_prefixes: list[str] | tuple[str, ...]
) -> TypeDependencyGraph:
    """Drop standard-library vertices and their incident edges.

    Seeds are never pruned. Idempotent.
    """
    pruned = TypeDependencyGraph()
    for name, info in graph.vertices.items():
        is_stdlib = any(name.startswith(p) for p in stdlib_prefixes)
        if is_stdlib and name not in graph.seeds:
            continue
        pruned.vertices[name] = info
        pruned.depth[name] = graph.depth[name]
    pruned.seeds = set(graph.seeds)
    pruned.edges = {
        (a, b) for a, b in graph.edges
        if a in pruned.vertices and b in pruned.vertices
    }
    return pruned


def _render_type(info: TypeInfo, include_private: bool) -> str:
    lines = [f"{info.kind} {info.qualified_name}"]
    for name, decl_type, visibility in info.fields:
        if visibility == "private" and not include_private:
            continue
        prefix = f"{visibility} " if visibility else ""
        lines.append(f"  {prefix}{decl_type} {name}")
    for sig in info.method_signatures:
        if not include_private and sig.lstrip().startswith("private "):
            continue
        lines.append(f"  {sig}")
    return "\n".join(lines)


def render_type_context(
    graph: TypeDependencyGraph,
    budget: int = DEFAULT_TYPE_CONTEXT_BUDGET,
    private_member_types: set[str] | frozenset[str] = frozenset(),
) -> str:
    """Deterministic textual rendering of the dependency graph.

    Seeds come first, then depth-1 types, each group in qualified-name
    order. Private members are rendered only for types listed in
    ``private_member_types`` (normally the target's enclosing type).
    Over budget, depth-1 types are dropped alphabetically-last first;
    seeds are never dropped.
    """
    seed_names = sorted(n for n in graph.vertices if n in graph.seeds)
    neighbor_names = sorted(n for n in graph.vertices if n not in graph.seeds)
    blocks = [
        (name, _render_type(graph.vertices[name], name in private_member_types))
        for name in seed_names + neighbor_names
    ]
    droppable = len(neighbor_names)

    def total(items):
        return len("\n\n".join(b for _, b in items).encode("utf-8"))

    while droppable and total(blocks) > budget:
        blocks.pop()  # alphabetically-last depth-1 type
        droppable -= 1
    text = "\n\n".join(b for _, b in blocks)
    if len(text.encode("utf-8")) > budget:
        text = text.encode("utf-8")[:budget].decode("utf-8", errors="ignore")
    return text
