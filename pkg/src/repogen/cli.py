"""Command-line orchestration: index, generate, eval, cache.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click

from .cache import Cache, ConfigError, ContextEngine, RunConfig, cmd_index
from .evaluation import (
    ConfigurationError,
    Strategy,
    load_manifest,
    run_strategy,
    run_task,
    summary_table,
)
from .generation import (
    GenerationTask,
    GenParams,
    HttpCompletionEndpoint,
    ReplayStubEndpoint,
)

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_STAGE = 3


def _load_config(config_path, repo, **overrides) -> RunConfig:
    if config_path:
        cfg = RunConfig.from_file(config_path, **overrides)
        if repo:
            cfg = RunConfig.from_dict({**_config_dict(cfg), "repo_root": repo})
        return cfg
    if not repo:
        raise ConfigError("either --config or --repo is required")
    data = {"repo_root": repo}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data)


def _config_dict(cfg: RunConfig) -> dict:
    return {
        "repo_root": str(cfg.repo_root),
        "language": cfg.language,
        "max_chunk_size": cfg.max_chunk_size,
        "k_per_retriever": cfg.k_per_retriever,
        "fusion_weights": list(cfg.fusion_weights),
        "prompt_budget": cfg.prompt_budget,
        "type_context_budget": cfg.type_context_budget,
        "embedding_url": cfg.embedding_url,
        "embedding_dimension": cfg.embedding_dimension,
        "generation_url": cfg.generation_url,
        "cache_dir": str(cfg.cache_dir) if cfg.cache_dir else None,
        "analyzer_manifest": str(cfg.analyzer_manifest) if cfg.analyzer_manifest else None,
    }


def _endpoint(cfg: RunConfig, endpoint_url, stub_file):
    if stub_file:
        completions = json.loads(Path(stub_file).read_text(encoding="utf-8"))
        return ReplayStubEndpoint(completions)
    url = endpoint_url or cfg.generation_url
    if not url:
        raise ConfigError(
            "a generation endpoint URL is required (--endpoint, config "
            "generation_url, or --stub-completions)")
    return HttpCompletionEndpoint(url)


_shared_options = [
    click.option("--repo", type=click.Path(exists=True, file_okay=False), default=None),
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--cache-dir", default=None),
    click.option("--language", default=None),
    click.option("--chunk-size", "max_chunk_size", type=int, default=None),
    click.option("--k", "k_per_retriever", type=int, default=None),
    click.option("--weights", default=None, help="sparse,dense fusion weights, e.g. 0.3,0.7"),
]


def shared_options(fn):
    for opt in reversed(_shared_options):
        fn = opt(fn)
    return fn


def _overrides(cache_dir, language, max_chunk_size, k_per_retriever, weights):
    out = {
        "cache_dir": cache_dir,
        "language": language,
        "max_chunk_size": max_chunk_size,
        "k_per_retriever": k_per_retriever,
    }
    if weights:
        out["fusion_weights"] = [float(w) for w in weights.split(",")]
    return out


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("index")
@shared_options
def index_cmd(repo, config_path, cache_dir, language, max_chunk_size,
              k_per_retriever, weights):
    """Chunk the repository and build/cache both retrieval indexes."""
    try:
        cfg = _load_config(config_path, repo,
                           **_overrides(cache_dir, language, max_chunk_size,
                                        k_per_retriever, weights))
    except (ConfigError, json.JSONDecodeError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        report = cmd_index(cfg)
    except Exception as exc:
        click.echo(f"index stage failed: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@main.command("generate")
@shared_options
@click.option("--task", "task_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", default="catcoder",
              type=click.Choice(["vanilla", "in_file", "repocoder", "catcoder"]))
@click.option("--endpoint", "endpoint_url", default=None)
@click.option("--stub-completions", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--run-dir", default=None)
@click.option("--samples", type=int, default=1)
def generate_cmd(repo, config_path, cache_dir, language, max_chunk_size,
                 k_per_retriever, weights, task_file, strategy, endpoint_url,
                 stub_completions, run_dir, samples):
    """Build the prompt for one task, call the endpoint, print the candidate."""
    try:
        cfg = _load_config(config_path, repo,
                           **_overrides(cache_dir, language, max_chunk_size,
                                        k_per_retriever, weights))
        endpoint = _endpoint(cfg, endpoint_url, stub_completions)
        spec = json.loads(Path(task_file).read_text(encoding="utf-8"))
        task = GenerationTask(
            task_id=spec.get("id", Path(task_file).stem),
            file_path=spec["file"],
            signature=spec["signature"],
            docstring=spec.get("docstring", ""),
            insertion_span=tuple(spec["span"]),
            language=cfg.language,
        )
    except (ConfigError, ConfigurationError, KeyError, ValueError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        engine = ContextEngine(cfg)
        start = time.perf_counter()
        bundle, candidates = run_task(
            Strategy(name=strategy, k_per_retriever=cfg.k_per_retriever),
            task, engine, cfg.repo_root,
            GenParams(samples=samples), endpoint,
            Path(run_dir) if run_dir else None,
        )
        elapsed = time.perf_counter() - start
    except Exception as exc:
        click.echo(f"generate stage failed: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    if run_dir:
        out = Path(run_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "prompt.txt").write_text(bundle.full_prompt, encoding="utf-8")
        for i, cand in enumerate(candidates):
            (out / f"candidate_{i}.txt").write_text(cand, encoding="utf-8")
        (out / "timings.json").write_text(json.dumps({
            "total_seconds": elapsed, **engine.timings,
            "cache_hits": engine.cache_hits,
        }, indent=2, sort_keys=True), encoding="utf-8")
    click.echo(candidates[0])


@main.command("eval")
@shared_options
@click.option("--manifest", "manifest_file", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--strategy", default="catcoder",
              type=click.Choice(["vanilla", "in_file", "repocoder", "catcoder"]))
@click.option("--endpoint", "endpoint_url", default=None)
@click.option("--stub-completions", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--run-dir", default=None)
@click.option("--samples", type=int, default=10)
def eval_cmd(repo, config_path, cache_dir, language, max_chunk_size,
             k_per_retriever, weights, manifest_file, strategy, endpoint_url,
             stub_completions, run_dir, samples):
    """Run a strategy over a benchmark manifest and print the score table."""
    try:
        manifest = load_manifest(manifest_file)
        cfg = _load_config(config_path, repo or str(manifest.repo_root),
                           **_overrides(cache_dir, language or manifest.language,
                                        max_chunk_size, k_per_retriever, weights))
        endpoint = _endpoint(cfg, endpoint_url, stub_completions)
    except (ConfigError, ConfigurationError, json.JSONDecodeError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        engine = ContextEngine(cfg)
        results = run_strategy(
            Strategy(name=strategy, k_per_retriever=cfg.k_per_retriever),
            manifest, GenParams(samples=samples), endpoint, engine,
            Path(run_dir) if run_dir else None,
        )
        table = summary_table(results)
    except Exception as exc:
        click.echo(f"eval stage failed: {exc}", err=True)
        sys.exit(EXIT_STAGE)
    if run_dir:
        out = Path(run_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(table, encoding="utf-8")
    click.echo(table, nl=False)


@main.group("cache")
def cache_group():
    """Inspect or clear the artifact cache."""


@cache_group.command("inspect")
@click.option("--cache-dir", required=True)
def cache_inspect(cache_dir):
    cache = Cache(cache_dir)
    for entry in cache.entries():
        click.echo(f"{entry.kind}  {entry.key[:16]}  {entry.payload_path.name}")


@cache_group.command("clear")
@click.option("--cache-dir", required=True)
def cache_clear(cache_dir):
    removed = Cache(cache_dir).clear()
    click.echo(f"removed {removed} cache entries")


if __name__ == "__main__":
    main()
