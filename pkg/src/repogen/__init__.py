"""Repository-context engine for function-level code generation.

Combines structure-aware chunking, hybrid sparse/dense retrieval with
reciprocal rank fusion, analyzer-derived type context, prompt assembly,
and an unbiased compile@k / pass@k evaluation harness.
"""

__version__ = "0.1.0"
