"""Prompt assembly, generation endpoint clients, and post-processing.

The prompt has two fields, CONTEXT and CODE. CONTEXT concatenates the
type context and the retrieved chunks (best-ranked chunk last, nearest
to the code); CODE holds the docstring and the signature, and the
prompt ends immediately after the signature's final character.
"""

from __future__ import annotations

import json
import logging
import os
import re
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

from .chunking import CodeChunk, LanguageProfile

logger = logging.getLogger(__name__)

CONTEXT_HEADER = "### CONTEXT"
CODE_HEADER = "### CODE"

DEFAULT_PROMPT_BUDGET = 24_576

AUTH_TOKEN_ENV = "REPOGEN_API_TOKEN"


class PromptBudgetError(ValueError):
    """The fixed prompt parts alone exceed the byte budget."""


@dataclass(frozen=True)
class GenerationTask:
    """A target function stub to complete inside a repository."""

    task_id: str
    file_path: str
    signature: str
    docstring: str
    insertion_span: tuple[int, int]
    language: str
    compile_cmd: str | None = None
    test_cmd: str | None = None

    def __post_init__(self):
        if not self.signature.strip():
            raise ValueError("signature must be non-empty")
        start, end = self.insertion_span
        if not (0 <= start <= end):
            raise ValueError(f"invalid insertion span: {self.insertion_span}")


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.6
    top_p: float = 0.7
    max_new_tokens: int = 512
    samples: int = 10

    def __post_init__(self):
        if not 0 <= self.top_p <= 1:
            raise ValueError("top_p must be in [0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class PromptBundle:
    context_block: str
    code_block_prefix: str
    full_prompt: str


def _chunk_block(chunk: CodeChunk) -> str:
    text = chunk.text if chunk.text.endswith("\n") else chunk.text + "\n"
    return f"// file: {chunk.file_path}\n{text}"


def _render_prompt(context_block: str, code_prefix: str) -> str:
    return f"{CONTEXT_HEADER}\n{context_block}\n{CODE_HEADER}\n{code_prefix}"


def build_prompt(
    type_ctx: str,
    chunks: list[CodeChunk],
    task: GenerationTask,
    budget: int = DEFAULT_PROMPT_BUDGET,
) -> PromptBundle:
    """Assemble the prompt; drop worst-ranked chunks to fit the budget.

    ``chunks`` must be in fused rank order (best first). The rendered
    CONTEXT places them best-rank-last so the most relevant code sits
    closest to the CODE block. The type context is never dropped.
    """
    docstring = task.docstring.rstrip()
    code_prefix = (docstring + "\n" if docstring else "") + task.signature.rstrip()
    kept = list(chunks)
    while True:
        parts = [type_ctx.rstrip()] if type_ctx.strip() else []
        parts.extend(_chunk_block(c).rstrip() for c in reversed(kept))
        context_block = "\n\n".join(parts)
        full = _render_prompt(context_block, code_prefix)
        if len(full.encode("utf-8")) <= budget:
            return PromptBundle(
                context_block=context_block,
                code_block_prefix=code_prefix,
                full_prompt=full,
            )
        if not kept:
            raise PromptBudgetError(
                f"prompt of {len(full.encode())} bytes exceeds budget {budget} "
                "with no chunks left to drop"
            )
        kept.pop()  # worst-ranked chunk goes first


class CompletionEndpoint(Protocol):
    def complete(self, prompt: str, params: GenParams) -> str: ...


class EndpointError(RuntimeError):
    """Generation endpoint failure; safe to retry."""


class HttpCompletionEndpoint:
    """Client for a text-completion endpoint.

    Wire contract: POST {"prompt", "temperature", "top_p", "max_tokens"}
    -> {"text": "..."}. The auth token, if any, comes from the
    REPOGEN_API_TOKEN environment variable.
    """

    def __init__(self, url: str, session: requests.Session | None = None,
                 timeout: float = 120.0):
        self.url = url
        self.timeout = timeout
        self._session = session or requests.Session()

    def complete(self, prompt: str, params: GenParams) -> str:
        headers = {}
        token = os.environ.get(AUTH_TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session.post(
                self.url,
                json={
                    "prompt": prompt,
                    "temperature": params.temperature,
                    "top_p": params.top_p,
                    "max_tokens": params.max_new_tokens,
                },
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["text"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise EndpointError(f"completion request failed: {exc}") from exc


class ReplayStubEndpoint:
    """Deterministic stand-in for the generation endpoint.

    Returns canned completions (cycling when exhausted) or the result of
    a callable applied to the prompt. Every received prompt is recorded
    for assertions.
    """

    def __init__(self, completions: list[str] | Callable[[str], str]):
        self._completions = completions
        self._calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str, params: GenParams) -> str:
        self.prompts.append(prompt)
        if callable(self._completions):
            return self._completions(prompt)
        text = self._completions[self._calls % len(self._completions)]
        self._calls += 1
        return text


def generate(
    bundle: PromptBundle,
    params: GenParams,
    endpoint: CompletionEndpoint,
    archive_dir: str | Path | None = None,
    run_id: str | None = None,
) -> list[str]:
    """Draw ``params.samples`` completions, ordered by sample index.

    When ``archive_dir`` is set, every request/response pair is written
    there so a run can be replayed.
    """
    run_id = run_id or uuid.uuid4().hex
    samples: list[str] = []
    archive = Path(archive_dir) if archive_dir else None
    if archive:
        archive.mkdir(parents=True, exist_ok=True)
        (archive / f"{run_id}.prompt.txt").write_text(bundle.full_prompt, encoding="utf-8")
    for i in range(params.samples):
        text = endpoint.complete(bundle.full_prompt, params)
        samples.append(text)
        if archive:
            record = {"run_id": run_id, "sample": i, "text": text}
            with open(archive / f"{run_id}.samples.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return samples


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_OPEN_FENCE_RE = re.compile(r"```[^\n]*\n")


def _strip_fences(raw: str) -> str:
    match = _FENCE_RE.search(raw)
    if match:
        return match.group(1)
    match = _OPEN_FENCE_RE.search(raw)
    if match:
        return raw[match.end():]
    return raw


def _truncate_balanced(text: str, body_start: int) -> str:
    """Cut right after the position where braces first balance to zero."""
    depth = 0
    opened = False
    for i in range(body_start, len(text)):
        ch = text[i]
        if ch == "{":
            depth += 1
            opened = True
        elif ch == "}":
            depth -= 1
            if opened and depth == 0:
                return text[: i + 1]
    return text


def postprocess(raw: str, task: GenerationTask, profile: LanguageProfile) -> str:
    """Normalize a raw completion into a candidate function.

    Strips Markdown fences, prepends the signature when missing, and
    truncates at the point where the function's braces balance back to
    zero, which also removes trailing prose. Unparseable output is
    returned as-is and fails compilation downstream. Idempotent.
    """
    text = _strip_fences(raw).strip("\n")
    signature = task.signature.rstrip()
    if not text.lstrip().startswith(signature):
        text = signature + "\n" + text
    else:
        text = text.lstrip("\n")
    sig_end = text.index(signature) + len(signature)
    return _truncate_balanced(text, sig_end).rstrip("\n")
