from __future__ import annotations

import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from repogen.chunking import JAVA_PROFILE, RUST_PROFILE
from repogen.generation import (
    CODE_HEADER,
    CONTEXT_HEADER,
    GenerationTask,
    GenParams,
    PromptBudgetError,
    ReplayStubEndpoint,
    build_prompt,
    generate,
    postprocess,
)

from conftest import make_chunk

DATA = Path(__file__).parent / "data"


def simple_task(signature="public int add(int a, int b)", docstring="/** Adds. */",
                language="java"):
    return GenerationTask(
        task_id="t1", file_path="src/Math.java", signature=signature,
        docstring=docstring, insertion_span=(10, 20), language=language)


class TestBuildPrompt:
    def test_vanilla_has_empty_context(self):
        bundle = build_prompt("", [], simple_task())
        assert bundle.context_block == ""
        assert bundle.full_prompt == (
            f"{CONTEXT_HEADER}\n\n{CODE_HEADER}\n/** Adds. */\npublic int add(int a, int b)")

    def test_prompt_ends_at_signature(self):
        chunks = [make_chunk("d0", "int helper() { return 1; }\n")]
        bundle = build_prompt("class ctx", chunks, simple_task())
        assert bundle.full_prompt.endswith("public int add(int a, int b)")

    def test_golden_shape(self):
        chunks = [
            make_chunk("d0", "int best() { return 1; }\n", path="a/Best.java"),
            make_chunk("d1", "int worst() { return 2; }\n", path="b/Worst.java"),
        ]
        bundle = build_prompt("interface Ctx", chunks, simple_task())
        expected = (
            "### CONTEXT\n"
            "interface Ctx\n"
            "\n"
            "// file: b/Worst.java\n"
            "int worst() { return 2; }\n"
            "\n"
            "// file: a/Best.java\n"
            "int best() { return 1; }\n"
            "### CODE\n"
            "/** Adds. */\n"
            "public int add(int a, int b)"
        )
        assert bundle.full_prompt == expected

    def test_best_rank_last(self):
        chunks = [
            make_chunk("best", "BEST_CHUNK\n"),
            make_chunk("worst", "WORST_CHUNK\n"),
        ]
        bundle = build_prompt("", chunks, simple_task())
        assert bundle.context_block.index("WORST_CHUNK") < \
            bundle.context_block.index("BEST_CHUNK")

    def test_budget_drops_worst_chunk(self):
        chunks = [
            make_chunk("best", "K" * 100 + "\n"),
            make_chunk("worst", "W" * 100 + "\n"),
        ]
        full = build_prompt("", chunks, simple_task()).full_prompt
        tight = build_prompt("", chunks, simple_task(),
                             budget=len(full.encode()) - 1).full_prompt
        assert "W" * 100 not in tight
        assert "K" * 100 in tight

    def test_type_context_never_dropped(self):
        chunks = [make_chunk("d0", "CHUNK\n")]
        bundle = build_prompt("TYPECTX", chunks, simple_task(), budget=120)
        assert "TYPECTX" in bundle.full_prompt

    def test_budget_too_small_errors(self):
        with pytest.raises(PromptBudgetError):
            build_prompt("T" * 100, [], simple_task(), budget=50)

    def test_determinism(self):
        chunks = [make_chunk(f"d{i}", f"chunk {i}\n") for i in range(3)]
        a = build_prompt("ctx", chunks, simple_task())
        b = build_prompt("ctx", chunks, simple_task())
        assert a.full_prompt == b.full_prompt


class TestGenerate:
    def test_single_sample_stub(self):
        stub = ReplayStubEndpoint(["int x = 1;"])
        bundle = build_prompt("", [], simple_task())
        out = generate(bundle, GenParams(samples=1), stub)
        assert out == ["int x = 1;"]

    def test_sample_count(self):
        stub = ReplayStubEndpoint(["a", "b"])
        bundle = build_prompt("", [], simple_task())
        out = generate(bundle, GenParams(samples=10), stub)
        assert len(out) == 10
        assert out[:4] == ["a", "b", "a", "b"]

    def test_echo_stub_sees_prompt_suffix(self):
        stub = ReplayStubEndpoint(lambda prompt: prompt[-28:])
        bundle = build_prompt("", [], simple_task())
        out = generate(bundle, GenParams(samples=1), stub)
        assert out[0] == "public int add(int a, int b)"

    def test_archive_written(self, tmp_path):
        stub = ReplayStubEndpoint(["body"])
        bundle = build_prompt("", [], simple_task())
        generate(bundle, GenParams(samples=2), stub, archive_dir=tmp_path,
                 run_id="run0")
        assert (tmp_path / "run0.prompt.txt").read_text() == bundle.full_prompt
        lines = (tmp_path / "run0.samples.jsonl").read_text().splitlines()
        assert len(lines) == 2

    def test_params_validation(self):
        with pytest.raises(ValueError):
            GenParams(top_p=1.5)
        with pytest.raises(ValueError):
            GenParams(samples=0)


def load_cases():
    return json.loads((DATA / "postprocess_cases.json").read_text())


class TestPostprocess:
    @pytest.mark.parametrize("case", load_cases(), ids=lambda c: c["name"])
    def test_golden(self, case):
        task = simple_task(signature=case["signature"],
                           language="rust" if "rust" in case["name"] else "java")
        profile = RUST_PROFILE if task.language == "rust" else JAVA_PROFILE
        assert postprocess(case["raw"], task, profile) == case["expected"]

    @pytest.mark.parametrize("case", load_cases(), ids=lambda c: c["name"])
    def test_idempotent(self, case):
        task = simple_task(signature=case["signature"],
                           language="rust" if "rust" in case["name"] else "java")
        profile = RUST_PROFILE if task.language == "rust" else JAVA_PROFILE
        once = postprocess(case["raw"], task, profile)
        assert postprocess(once, task, profile) == once

    def test_balanced_delimiters_after_truncation(self):
        raw = "public int add(int a, int b) {\n if (a>0) { return a; }\n return b;\n}\njunk }"
        out = postprocess(raw, simple_task(), JAVA_PROFILE)
        assert out.count("{") == out.count("}")

    @given(st.text(alphabet="abc{}()\n` ", max_size=200))
    @settings(max_examples=60, deadline=None)
    def test_idempotence_property(self, raw):
        task = simple_task()
        once = postprocess(raw, task, JAVA_PROFILE)
        assert postprocess(once, task, JAVA_PROFILE) == once
