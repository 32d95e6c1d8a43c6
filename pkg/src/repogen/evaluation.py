"""Strategy runner and unbiased compile@k / pass@k scoring.

score@k for one task is 1 - C(n-c, k) / C(n, k): the probability that a
random size-k subset of the n samples contains at least one correct
one. The benchmark score is the mean over tasks.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Protocol

from .generation import (
    GenerationTask,
    GenParams,
    CompletionEndpoint,
    PromptBundle,
    build_prompt,
    generate,
    postprocess,
)
from .chunking import PROFILES, CodeChunk

logger = logging.getLogger(__name__)

DEFAULT_COMPILE_TIMEOUT = 120.0
DEFAULT_TEST_TIMEOUT = 600.0

STRATEGY_NAMES = ("vanilla", "in_file", "repocoder", "catcoder")


class ConfigurationError(ValueError):
    pass


def score_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k) / C(n, k), evaluated exactly."""
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n - c < k:
        return 1.0
    return float(1 - Fraction(comb(n - c, k), comb(n, k)))


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    n: int
    compile_flags: tuple[bool, ...]
    pass_flags: tuple[bool, ...]

    def __post_init__(self):
        if len(self.compile_flags) != self.n or len(self.pass_flags) != self.n:
            raise ValueError("flag lists must have length n")
        for compiled, passed in zip(self.compile_flags, self.pass_flags):
            if passed and not compiled:
                raise ValueError("pass implies compile")

    def correct_count(self, metric: str) -> int:
        if metric == "compile":
            return sum(self.compile_flags)
        if metric == "pass":
            return sum(self.pass_flags)
        raise ValueError(f"unknown metric: {metric}")


def aggregate(results: list[TaskResult], k: int, metric: str) -> float:
    """Mean per-task score@k over the result set."""
    if not results:
        raise ValueError("empty result set")
    scores = [score_at_k(r.n, r.correct_count(metric), k) for r in results]
    return sum(scores) / len(scores)


@dataclass(frozen=True)
class Strategy:
    """Context-filling strategy for the prompt's CONTEXT field."""

    name: str
    iterations: int = 2  # repocoder only
    k_per_retriever: int | None = None  # None: profile default

    def __post_init__(self):
        if self.name not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy: {self.name}")


@dataclass
class BenchmarkManifest:
    repo_root: Path
    language: str
    tasks: list[GenerationTask]


def load_manifest(path: str | Path) -> BenchmarkManifest:
    """Load and validate a benchmark manifest (JSON, documented schema)."""
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    repo_root = Path(data["repo_root"])
    if not repo_root.is_absolute():
        repo_root = (path.parent / repo_root).resolve()
    language = data.get("language", "java")
    if language not in PROFILES:
        raise ConfigurationError(f"unknown language: {language}")
    tasks = []
    for spec in data["tasks"]:
        task = GenerationTask(
            task_id=spec["id"],
            file_path=spec["file"],
            signature=spec["signature"],
            docstring=spec.get("docstring", ""),
            insertion_span=tuple(spec["span"]),
            language=language,
            compile_cmd=spec.get("compile_cmd"),
            test_cmd=spec.get("test_cmd"),
        )
        target = repo_root / task.file_path
        if not target.is_file():
            raise ConfigurationError(f"task file missing: {target}")
        size = target.stat().st_size
        if task.insertion_span[1] > size:
            raise ConfigurationError(
                f"span {task.insertion_span} outside {task.file_path} ({size} bytes)"
            )
        tasks.append(task)
    if not tasks:
        raise ConfigurationError("manifest contains no tasks")
    return BenchmarkManifest(repo_root=repo_root, language=language, tasks=tasks)


def _run_cmd(cmd: str, cwd: Path, timeout: float) -> bool:
    try:
        proc = subprocess.run(
            cmd, shell=True, cwd=cwd, timeout=timeout,
            capture_output=True,
        )
        return proc.returncode == 0
    except subprocess.TimeoutExpired:
        logger.warning("command timed out after %ss: %s", timeout, cmd)
        return False


def verify_sample(
    task: GenerationTask,
    candidate: str,
    repo_root: str | Path,
    compile_timeout: float = DEFAULT_COMPILE_TIMEOUT,
    test_timeout: float = DEFAULT_TEST_TIMEOUT,
) -> tuple[bool, bool]:
    """Splice the candidate, run the verifier commands, restore the file.

    The repository copy must be writable scratch; the target file is
    restored bit-identically afterwards. Timeouts count as failures.
    """
    if not task.compile_cmd:
        raise ConfigurationError(f"task {task.task_id} has no compile command")
    repo_root = Path(repo_root)
    target = repo_root / task.file_path
    original = target.read_bytes()
    start, end = task.insertion_span
    spliced = original[:start] + candidate.encode("utf-8") + original[end:]
    try:
        target.write_bytes(spliced)
        compiled = _run_cmd(task.compile_cmd, repo_root, compile_timeout)
        passed = False
        if compiled and task.test_cmd:
            passed = _run_cmd(task.test_cmd, repo_root, test_timeout)
        return compiled, passed
    finally:
        target.write_bytes(original)


class ContextProvider(Protocol):
    """What run_strategy needs from the orchestration layer."""

    def retrieve(self, query: str, k: int | None,
                 exclude: set[str]) -> list[CodeChunk]: ...

    def type_context_for(self, task: GenerationTask) -> str: ...

    def prompt_budget(self) -> int: ...

    def overlapping_doc_ids(self, task: GenerationTask) -> set[str]: ...


def default_query(task: GenerationTask) -> str:
    """Docstring concatenated with the signature."""
    return f"{task.docstring} {task.signature}".strip()


def in_file_context(task: GenerationTask, repo_root: Path, budget: int) -> str:
    """All bytes preceding the insertion span, front-trimmed to budget."""
    data = (repo_root / task.file_path).read_bytes()[: task.insertion_span[0]]
    if len(data) > budget:
        data = data[-budget:]
    return data.decode("utf-8", errors="ignore")


def build_strategy_prompt(
    strategy: Strategy,
    task: GenerationTask,
    engine: ContextProvider,
    repo_root: Path,
    query: str | None = None,
) -> PromptBundle:
    """Fill the CONTEXT field according to the strategy."""
    budget = engine.prompt_budget()
    if strategy.name == "vanilla":
        return build_prompt("", [], task, budget)
    if strategy.name == "in_file":
        # reserve room for the CODE block and template scaffolding
        reserve = len(task.docstring.encode()) + len(task.signature.encode()) + 64
        ctx = in_file_context(task, repo_root, max(budget - reserve, 0))
        return build_prompt(ctx, [], task, budget)
    exclude = engine.overlapping_doc_ids(task)
    chunks = engine.retrieve(query or default_query(task),
                             strategy.k_per_retriever, exclude)
    if strategy.name == "repocoder":
        return build_prompt("", chunks, task, budget)
    # catcoder: fused retrieval plus type context
    type_ctx = engine.type_context_for(task)
    return build_prompt(type_ctx, chunks, task, budget)


def run_task(
    strategy: Strategy,
    task: GenerationTask,
    engine: ContextProvider,
    repo_root: Path,
    gen_params: GenParams,
    endpoint: CompletionEndpoint,
    archive_dir: Path | None = None,
) -> tuple[PromptBundle, list[str]]:
    """Produce the final prompt and post-processed candidates for a task.

    The repocoder strategy iterates: the first iteration queries with
    the docstring/signature and draws one sample; each later iteration
    queries with the previous iteration's generated code, and only the
    final iteration draws the full n samples.
    """
    profile = PROFILES[task.language]
    if strategy.name == "repocoder" and strategy.iterations > 1:
        query = default_query(task)
        intermediate = GenParams(
            temperature=gen_params.temperature, top_p=gen_params.top_p,
            max_new_tokens=gen_params.max_new_tokens, samples=1,
        )
        for _ in range(strategy.iterations - 1):
            bundle = build_strategy_prompt(strategy, task, engine, repo_root, query)
            raw = generate(bundle, intermediate, endpoint, archive_dir)[0]
            query = postprocess(raw, task, profile)
        bundle = build_strategy_prompt(strategy, task, engine, repo_root, query)
    else:
        bundle = build_strategy_prompt(strategy, task, engine, repo_root)
    raws = generate(bundle, gen_params, endpoint, archive_dir)
    candidates = [postprocess(r, task, profile) for r in raws]
    return bundle, candidates


def run_strategy(
    strategy: Strategy,
    manifest: BenchmarkManifest,
    gen_params: GenParams,
    endpoint: CompletionEndpoint,
    engine: ContextProvider,
    run_dir: Path | None = None,
) -> list[TaskResult]:
    """Run one strategy over the benchmark; per-task failures are recorded
    as all-false results and the run continues."""
    results: list[TaskResult] = []
    for task in manifest.tasks:
        archive = (run_dir / task.task_id) if run_dir else None
        try:
            bundle, candidates = run_task(
                strategy, task, engine, manifest.repo_root,
                gen_params, endpoint, archive,
            )
            compile_flags = []
            pass_flags = []
            for candidate in candidates:
                compiled, passed = verify_sample(task, candidate, manifest.repo_root)
                compile_flags.append(compiled)
                pass_flags.append(passed)
        except Exception:
            logger.exception("task %s failed", task.task_id)
            compile_flags = [False] * gen_params.samples
            pass_flags = [False] * gen_params.samples
            bundle, candidates = None, []
        result = TaskResult(
            task_id=task.task_id,
            n=gen_params.samples,
            compile_flags=tuple(compile_flags),
            pass_flags=tuple(pass_flags),
        )
        results.append(result)
        if run_dir:
            run_dir.mkdir(parents=True, exist_ok=True)
            with open(run_dir / "results.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps({
                    "task_id": result.task_id,
                    "n": result.n,
                    "compile_flags": list(result.compile_flags),
                    "pass_flags": list(result.pass_flags),
                }, sort_keys=True) + "\n")
    return results


def summary_table(results: list[TaskResult], ks: tuple[int, ...] = (1, 3, 5)) -> str:
    """Deterministic aggregate table of compile@k / pass@k percentages."""
    lines = ["metric  " + "  ".join(f"k={k}" for k in ks)]
    for metric in ("compile", "pass"):
        cells = []
        for k in ks:
            usable = [r for r in results if r.n >= k]
            value = aggregate(usable, k, metric) * 100 if usable else 0.0
            cells.append(f"{value:6.2f}")
        lines.append(f"{metric:<8}" + "  ".join(cells))
    return "\n".join(lines) + "\n"
