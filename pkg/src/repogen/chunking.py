"""Structure-aware source code chunking.

Files are split recursively into chunks no larger than a byte budget.
Splits only happen before structurally meaningful positions, in
descending priority: type definitions (1), function definitions (2),
control-flow statements (3), and plain line starts (4). A fragment with
no legal split point inside it is emitted whole and flagged oversized.

All offsets are byte offsets into the UTF-8 encoding of the file; split
points always land on line starts or the first non-whitespace byte of a
line, so multi-byte sequences are never cut.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

PRIORITY_TYPE_DEF = 1
PRIORITY_FN_DEF = 2
PRIORITY_CTRL_FLOW = 3
PRIORITY_NEWLINE = 4


@dataclass(frozen=True)
class LanguageProfile:
    """Lexical split rules and file selection for one language."""

    name: str
    type_def_patterns: tuple[str, ...]
    fn_def_patterns: tuple[str, ...]
    ctrl_flow_patterns: tuple[str, ...]
    newline_tokens: tuple[str, ...] = ("\n", "\r\n")
    extensions: tuple[str, ...] = ()
    stdlib_prefixes: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.type_def_patterns and self.fn_def_patterns and self.ctrl_flow_patterns):
            raise ValueError("pattern lists must be non-empty")
        if "\n" not in self.newline_tokens:
            raise ValueError('newline_tokens must contain "\\n"')


_JAVA_MODIFIERS = r"(?:(?:public|protected|private|static|final|abstract|sealed|non-sealed|strictfp|synchronized|native|default|transient|volatile)\s+)"

JAVA_PROFILE = LanguageProfile(
    name="java",
    type_def_patterns=(
        rf"{_JAVA_MODIFIERS}*(?:class|interface|enum|record|@interface)\b",
    ),
    fn_def_patterns=(
        # modifiers, then a return/ctor type-ish token, a name, and an open paren
        rf"{_JAVA_MODIFIERS}*[\w$<>\[\].]+(?:\s+[\w$]+)?\s*\([^;]*$",
        rf"{_JAVA_MODIFIERS}*[\w$<>\[\].]+\s+[\w$]+\s*\(.*\)\s*(?:\{{|throws\b)",
    ),
    ctrl_flow_patterns=(
        r"(?:if|else|for|while|do|switch|try|catch|finally|return|break|continue|throw)\b",
    ),
    extensions=(".java",),
    stdlib_prefixes=("java.", "javax.", "jdk."),
)

_RUST_VIS = r"(?:pub(?:\([^)]*\))?\s+)?"

RUST_PROFILE = LanguageProfile(
    name="rust",
    type_def_patterns=(
        rf"{_RUST_VIS}(?:struct|enum|trait|union|impl|mod|type)\b",
    ),
    fn_def_patterns=(
        rf"{_RUST_VIS}(?:async\s+)?(?:unsafe\s+)?(?:const\s+)?(?:extern\s+\S+\s+)?fn\b",
    ),
    ctrl_flow_patterns=(
        r"(?:if|else|for|while|loop|match|return|break|continue)\b",
    ),
    extensions=(".rs",),
    stdlib_prefixes=("std::", "core::", "alloc::"),
)

PROFILES: dict[str, LanguageProfile] = {
    "java": JAVA_PROFILE,
    "rust": RUST_PROFILE,
}


@dataclass(frozen=True)
class CodeChunk:
    """A contiguous span of one source file.

    ``byte_range`` is half-open [start, end) into the file's UTF-8 bytes;
    ``text`` is exactly the decoded slice. ``split_priority`` records the
    rule class of the chunk's leading boundary (0 for file start).
    """

    doc_id: str
    file_path: str
    byte_range: tuple[int, int]
    text: str
    split_priority: int
    oversized: bool = False


_PATTERN_CACHE: dict[int, list[tuple[re.Pattern[bytes], int]]] = {}


def _compiled_rules(profile: LanguageProfile) -> list[tuple[re.Pattern[bytes], int]]:
    # control flow is checked before function defs: a line like "if (x) {"
    # can lexically resemble a call/definition, and the keyword must win
    key = id(profile)
    rules = _PATTERN_CACHE.get(key)
    if rules is None:
        rules = (
            [(re.compile(p.encode()), PRIORITY_TYPE_DEF) for p in profile.type_def_patterns]
            + [(re.compile(p.encode()), PRIORITY_CTRL_FLOW) for p in profile.ctrl_flow_patterns]
            + [(re.compile(p.encode()), PRIORITY_FN_DEF) for p in profile.fn_def_patterns]
        )
        _PATTERN_CACHE[key] = rules
    return rules


def _classify_line(stripped: bytes, profile: LanguageProfile) -> int | None:
    for pat, pri in _compiled_rules(profile):
        if pat.match(stripped):
            return pri
    return None


def detect_split_points(text: str, profile: LanguageProfile) -> list[tuple[int, int]]:
    """Find legal split positions as (byte offset, priority), ascending.

    Definition-class points (priority 1-3) sit at the first
    non-whitespace byte of a matching line; every other line start
    (except offset 0) is a priority-4 point. An indented definition
    yields both its line-start point and its own higher-priority point.
    """
    data = text.encode("utf-8")
    if not data:
        return []
    points: list[tuple[int, int]] = []
    line_start = 0
    while line_start < len(data):
        nl = data.find(b"\n", line_start)
        line_end = len(data) if nl == -1 else nl + 1
        line = data[line_start:line_end]
        stripped = line.lstrip()
        pri = _classify_line(stripped, profile) if stripped else None
        first_nonws = line_start + (len(line) - len(stripped))
        if pri is not None:
            if first_nonws == line_start:
                points.append((line_start, pri))
            else:
                if line_start > 0:
                    points.append((line_start, PRIORITY_NEWLINE))
                points.append((first_nonws, pri))
        elif line_start > 0:
            points.append((line_start, PRIORITY_NEWLINE))
        line_start = line_end
    return points


def _split_fragment(
    data: bytes,
    start: int,
    end: int,
    leading_priority: int,
    points: list[tuple[int, int]],
    max_chunk_size: int,
    out: list[tuple[int, int, int, bool]],
) -> None:
    if end - start <= max_chunk_size:
        out.append((start, end, leading_priority, False))
        return
    interior = [(off, pri) for off, pri in points if start < off < end]
    if not interior:
        out.append((start, end, leading_priority, True))
        return
    legal = [(off, pri) for off, pri in interior if off - start <= max_chunk_size]
    if legal:
        best_pri = min(pri for _, pri in legal)
        cut, cut_pri = max((off, pri) for off, pri in legal if pri == best_pri)
    else:
        # even the earliest split leaves an oversized left part; take it
        cut, cut_pri = interior[0]
    _split_fragment(data, start, cut, leading_priority, points, max_chunk_size, out)
    _split_fragment(data, cut, end, cut_pri, points, max_chunk_size, out)


def split_source(
    text: str,
    profile: LanguageProfile,
    max_chunk_size: int,
    file_path: str = "<memory>",
) -> list[CodeChunk]:
    """Split one file into chunks no larger than ``max_chunk_size`` bytes.

    Chunks are in file order and concatenate back to the original text
    exactly. When a fragment must be split, the highest-priority point
    yielding the largest in-budget left part wins.
    """
    if max_chunk_size < 1:
        raise ValueError("max_chunk_size must be >= 1")
    if not text:
        return []
    data = text.encode("utf-8")
    points = detect_split_points(text, profile)
    spans: list[tuple[int, int, int, bool]] = []
    _split_fragment(data, 0, len(data), 0, points, max_chunk_size, spans)
    chunks = []
    for start, end, pri, oversized in spans:
        chunks.append(
            CodeChunk(
                doc_id=f"{file_path}:{start}-{end}",
                file_path=file_path,
                byte_range=(start, end),
                text=data[start:end].decode("utf-8"),
                split_priority=pri,
                oversized=oversized,
            )
        )
    return chunks


def chunk_repository(
    root: str | Path,
    profile: LanguageProfile,
    max_chunk_size: int,
) -> list[CodeChunk]:
    """Chunk every source file under ``root`` matched by the profile.

    Output ordering is lexicographic by repository-relative path, then
    by byte offset; doc_ids are stable across runs for identical file
    contents. Unreadable files are logged and skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"repository root not found: {root}")
    files = sorted(
        p for p in root.rglob("*")
        if p.is_file() and p.suffix in profile.extensions
    )
    chunks: list[CodeChunk] = []
    for path in files:
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_bytes().decode("utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            logger.warning("skipping unreadable file %s: %s", rel, exc)
            continue
        chunks.extend(split_source(text, profile, max_chunk_size, file_path=rel))
    return chunks


def write_chunk_manifest(chunks: list[CodeChunk], path: str | Path) -> None:
    """Export one JSON record per chunk, line-delimited."""
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(json.dumps({
                "doc_id": c.doc_id,
                "path": c.file_path,
                "start": c.byte_range[0],
                "end": c.byte_range[1],
                "priority": c.split_priority,
            }, sort_keys=True) + "\n")


def chunk_manifest_bytes(chunks: list[CodeChunk]) -> bytes:
    """Canonical manifest serialization, used for cache keying."""
    lines = [
        json.dumps({
            "doc_id": c.doc_id,
            "path": c.file_path,
            "start": c.byte_range[0],
            "end": c.byte_range[1],
            "priority": c.split_priority,
        }, sort_keys=True)
        for c in chunks
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")
