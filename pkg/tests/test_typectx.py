from __future__ import annotations

import pytest

from repogen.generation import GenerationTask
from repogen.typectx import (
    FixtureAnalyzerSession,
    TypeInfo,
    TypeResolutionError,
    expand_direct_neighbors,
    prune_stdlib,
    render_type_context,
    seed_types,
    TypeDependencyGraph,
)


def optimizer_task() -> GenerationTask:
    return GenerationTask(
        task_id="triu",
        file_path="src/GradientOptimizer.java",
        signature="private static RealMatrix triu(final RealMatrix m, int k)",
        docstring="/** Extracts the upper triangular part of a matrix. */",
        insertion_span=(100, 150),
        language="java",
    )


@pytest.fixture
def session(analyzer_manifest):
    return FixtureAnalyzerSession(analyzer_manifest)


class TestSeedTypes:
    def test_enclosing_and_signature_types(self, session):
        seeds = seed_types(optimizer_task(), session)
        names = {t.qualified_name for t in seeds}
        assert names == {"org.opt.GradientOptimizer", "org.opt.linear.RealMatrix"}

    def test_primitive_only_signature(self, session):
        task = GenerationTask(
            task_id="t", file_path="src/GradientOptimizer.java",
            signature="private double fitness(double[] point)",
            docstring="", insertion_span=(10, 20), language="java")
        seeds = seed_types(task, session)
        assert {t.qualified_name for t in seeds} == {"org.opt.GradientOptimizer"}

    def test_unresolved_enclosing_type_errors(self, session):
        task = GenerationTask(
            task_id="t", file_path="src/Unknown.java",
            signature="void f()", docstring="",
            insertion_span=(0, 10), language="java")
        with pytest.raises(TypeResolutionError):
            seed_types(task, session)


class TestExpandDirectNeighbors:
    def test_depth1_present_depth2_absent(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = expand_direct_neighbors(seeds, session)
        # RealMatrix is a seed here (named in the signature); RealVector is
        # its direct neighbor; nothing sits at distance 2
        assert "org.opt.linear.RealVector" in graph.vertices
        assert graph.depth["org.opt.linear.RealVector"] == 1
        assert max(graph.depth.values()) <= 1

    def test_optimizer_only_seed_keeps_vector_out(self, session):
        seeds = {session.resolve_type_name("org.opt.GradientOptimizer")}
        graph = expand_direct_neighbors(seeds, session)
        assert "org.opt.linear.RealMatrix" in graph.vertices
        assert "org.opt.linear.RealVector" not in graph.vertices  # distance 2

    def test_seed_without_references(self, session):
        seeds = {session.resolve_type_name("org.opt.linear.RealVector")}
        graph = expand_direct_neighbors(seeds, session)
        assert set(graph.vertices) == {"org.opt.linear.RealVector"}

    def test_mutually_referencing_seeds(self):
        manifest = {"types": {
            "a.A": {"kind": "class", "references": ["a.B"]},
            "a.B": {"kind": "class", "references": ["a.A"]},
        }}
        session = FixtureAnalyzerSession(manifest)
        seeds = {session.resolve_type_name("a.A"), session.resolve_type_name("a.B")}
        graph = expand_direct_neighbors(seeds, session)
        assert graph.depth == {"a.A": 0, "a.B": 0}
        assert graph.edges == {("a.A", "a.B"), ("a.B", "a.A")}

    def test_empty_seed_set_rejected(self, session):
        with pytest.raises(ValueError):
            expand_direct_neighbors(set(), session)


class TestPruneStdlib:
    def test_stdlib_removed(self, session):
        seeds = {session.resolve_type_name("org.opt.GradientOptimizer")}
        graph = expand_direct_neighbors(seeds, session)
        assert "java.util.List" in graph.vertices
        pruned = prune_stdlib(graph, ["java.", "javax."])
        assert "java.util.List" not in pruned.vertices
        assert all(not (a.startswith("java.") or b.startswith("java."))
                   for a, b in pruned.edges)

    def test_empty_prefix_list_no_change(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = expand_direct_neighbors(seeds, session)
        pruned = prune_stdlib(graph, [])
        assert set(pruned.vertices) == set(graph.vertices)

    def test_repo_types_survive(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = expand_direct_neighbors(seeds, session)
        pruned = prune_stdlib(graph, ["java."])
        repo_types = {n for n in graph.vertices if not n.startswith("java.")}
        assert set(pruned.vertices) == repo_types

    def test_seeds_never_pruned(self):
        manifest = {"types": {"java.weird.Seed": {"kind": "class"}}}
        session = FixtureAnalyzerSession(manifest)
        graph = expand_direct_neighbors(
            {session.resolve_type_name("java.weird.Seed")}, session)
        pruned = prune_stdlib(graph, ["java."])
        assert "java.weird.Seed" in pruned.vertices

    def test_idempotent(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = expand_direct_neighbors(seeds, session)
        once = prune_stdlib(graph, ["java."])
        twice = prune_stdlib(once, ["java."])
        assert set(once.vertices) == set(twice.vertices)
        assert once.edges == twice.edges


class TestRenderTypeContext:
    def test_empty_graph(self):
        assert render_type_context(TypeDependencyGraph()) == ""

    def test_single_type_golden(self):
        graph = TypeDependencyGraph()
        info = TypeInfo(
            qualified_name="a.Point", kind="class",
            fields=(("x", "double", "public"),),
            method_signatures=("double norm()",),
        )
        graph.add_vertex(info, depth=0)
        graph.seeds.add("a.Point")
        assert render_type_context(graph) == (
            "class a.Point\n"
            "  public double x\n"
            "  double norm()"
        )

    def test_optimizer_scenario_contains_matrix_api(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = prune_stdlib(expand_direct_neighbors(seeds, session), ["java."])
        text = render_type_context(
            graph, private_member_types={"org.opt.GradientOptimizer"})
        assert "double getEntry(int row, int column)" in text
        assert "int getRowDimension()" in text
        # seeds render before depth-1 types
        assert text.index("org.opt.GradientOptimizer") < text.index(
            "interface org.opt.linear.RealVector")

    def test_private_members_gated(self, session):
        seeds = {session.resolve_type_name("org.opt.GradientOptimizer")}
        graph = expand_direct_neighbors(seeds, session)
        with_private = render_type_context(
            graph, private_member_types={"org.opt.GradientOptimizer"})
        without = render_type_context(graph)
        assert "private double fitness" in with_private
        assert "private double fitness" not in without

    def test_budget_drops_last_neighbor_first(self):
        graph = TypeDependencyGraph()
        seed = TypeInfo(qualified_name="a.Seed", kind="class",
                        method_signatures=("void run()",))
        graph.add_vertex(seed, depth=0)
        graph.seeds.add("a.Seed")
        for name in ("a.Alpha", "a.Zeta"):
            graph.add_vertex(
                TypeInfo(qualified_name=name, kind="class",
                         method_signatures=("void method()" * 1,)), depth=1)
        full = render_type_context(graph, budget=10_000)
        tight = render_type_context(graph, budget=len(full.encode()) - 1)
        assert "a.Zeta" not in tight
        assert "a.Alpha" in tight
        assert "a.Seed" in tight

    def test_deterministic(self, session):
        seeds = seed_types(optimizer_task(), session)
        graph = prune_stdlib(expand_direct_neighbors(seeds, session), ["java."])
        assert render_type_context(graph) == render_type_context(graph)
