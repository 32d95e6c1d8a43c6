from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from repogen.chunking import JAVA_PROFILE, CodeChunk


@pytest.fixture
def java_profile():
    return JAVA_PROFILE


def make_chunk(doc_id: str, text: str, path: str = "a/File.java",
               start: int = 0, priority: int = 0) -> CodeChunk:
    return CodeChunk(
        doc_id=doc_id,
        file_path=path,
        byte_range=(start, start + len(text.encode())),
        text=text,
        split_priority=priority,
    )


def random_java_file(rng: random.Random, n_members: int = 6) -> str:
    """Synthetic but structurally plausible Java source."""
    name = "C" + str(rng.randrange(10_000))
    lines = [f"public class {name} {{"]
    for i in range(n_members):
        kind = rng.choice(["field", "method", "loop"])
        if kind == "field":
            lines.append(f"    private int field{i} = {rng.randrange(100)};")
        elif kind == "method":
            lines.append(f"    public int method{i}(int x) {{")
            lines.append(f"        return x + {rng.randrange(100)};")
            lines.append("    }")
        else:
            lines.append(f"    public void loop{i}() {{")
            lines.append(f"        for (int j = 0; j < {rng.randrange(2, 9)}; j++) {{")
            lines.append("            System.out.println(j);")
            lines.append("        }")
            lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"


@pytest.fixture
def fixture_repo(tmp_path: Path) -> Path:
    """Small deterministic repo of 3 Java files."""
    rng = random.Random(7)
    root = tmp_path / "repo"
    (root / "src").mkdir(parents=True)
    for i in range(3):
        (root / "src" / f"File{i}.java").write_text(
            random_java_file(rng), encoding="utf-8")
    return root


# Analyzer manifest mirroring the optimizer/matrix/vector scenario:
# the optimizer class references a matrix interface, which in turn
# references a vector interface (distance 2 from the seed set).
ANALYZER_MANIFEST = {
    "types": {
        "org.opt.GradientOptimizer": {
            "kind": "class",
            "file": "src/GradientOptimizer.java",
            "span": [0, 4000],
            "fields": [
                ["stepCount", "int", "private"],
                ["workspace", "RealMatrix", "private"],
            ],
            "methods": [
                "public RealMatrix ones(int n)",
                "private static RealMatrix triu(final RealMatrix m, int k)",
                "private double fitness(double[] point)",
            ],
            "references": ["org.opt.linear.RealMatrix", "java.util.List"],
        },
        "org.opt.linear.RealMatrix": {
            "kind": "interface",
            "file": "src/linear/RealMatrix.java",
            "span": [0, 2000],
            "methods": [
                "double getEntry(int row, int column)",
                "int getRowDimension()",
                "int getColumnDimension()",
                "RealVector getRowVector(int row)",
            ],
            "references": ["org.opt.linear.RealVector"],
        },
        "org.opt.linear.RealVector": {
            "kind": "interface",
            "file": "src/linear/RealVector.java",
            "span": [0, 2000],
            "methods": ["double dotProduct(RealVector v)"],
            "references": [],
        },
        "java.util.List": {
            "kind": "interface",
            "origin": "standard-library",
            "methods": ["int size()"],
            "references": [],
        },
        "java.util.Map": {
            "kind": "interface",
            "origin": "standard-library",
            "methods": ["int size()"],
            "references": [],
        },
    }
}


@pytest.fixture
def analyzer_manifest() -> dict:
    return json.loads(json.dumps(ANALYZER_MANIFEST))
