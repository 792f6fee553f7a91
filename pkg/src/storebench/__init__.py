"""Document-model vs relational query semantics, benchmarks and models."""

from .core import (
    CANONICAL_QUERY,
    ChargerRecord,
    Condition,
    Document,
    Op,
    QuerySpec,
    ScanStats,
    condition_matches,
    filter_brute_force,
)

__all__ = [
    "CANONICAL_QUERY",
    "ChargerRecord",
    "Condition",
    "Document",
    "Op",
    "QuerySpec",
    "ScanStats",
    "condition_matches",
    "filter_brute_force",
]
__version__ = "0.1.0"
