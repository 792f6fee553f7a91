"""Benchmark workloads, latency samples and throughput metrics.

Workloads run strictly sequentially, one operation completing before the
next starts. Only the operations themselves are timed; building the
dataset and loading the engine are not (except for ``iterative_create``,
whose whole point is loading).
"""

from __future__ import annotations

import csv
import json
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Iterable, Sequence

from .core import (
    CANONICAL_QUERY,
    LATITUDE_RANGE,
    Condition,
    Document,
    Op,
    ScanStats,
    StoreError,
    filter_brute_force,
)
from .datagen import GenSpec, documents
from .docstore import Collection
from .queryir import CHARGER_QUERY, execute, parse
from .relstore import CHARGER_SCHEMA, Table

WORKLOADS = (
    "single_read_pk",
    "iterative_read_secondary",
    "read_all",
    "single_update",
    "iterative_create",
    "read_all_filter",
    "read_range_filter",
    "multi_predicate",
    "resolver_query",
)
ENGINES = ("docstore", "relstore", "queryir")
SUPPORTED = {
    "docstore": set(WORKLOADS) - {"multi_predicate", "resolver_query"},
    "relstore": set(WORKLOADS) - {"read_range_filter", "resolver_query"},
    "queryir": {"resolver_query"},
}
ITERATIVE = {"iterative_read_secondary", "iterative_create"}
LARGE_N = 1_000_000
DEFAULT_SIZES = (10, 100, 1_000, 10_000, 100_000, 1_000_000)
AVG_DOC_BYTES = 76

CSV_COLUMNS = (
    "workload",
    "engine",
    "n",
    "r",
    "r_prime",
    "elapsed_ms",
    "op_count",
    "bytes",
    "docs_examined",
    "index_comparisons",
    "rows_scanned",
)


class UnsupportedCombination(StoreError):
    tag = "UnsupportedCombination"


class EmptyInput(StoreError):
    tag = "EmptyInput"


@dataclass(frozen=True)
class WorkloadSpec:
    workload: str
    engine: str
    sizes: tuple[int, ...] = DEFAULT_SIZES
    seed: int = 1
    repetitions: int = 1
    allow_large: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "sizes", tuple(self.sizes))
        if self.workload not in WORKLOADS:
            raise UnsupportedCombination(f"unknown workload {self.workload!r}")
        if self.engine not in ENGINES:
            raise UnsupportedCombination(f"unknown engine {self.engine!r}")
        if self.workload not in SUPPORTED[self.engine]:
            raise UnsupportedCombination(f"{self.workload} does not run on {self.engine}")
        if not self.sizes or any(n <= 0 for n in self.sizes):
            raise UnsupportedCombination("sizes must be positive")
        if self.repetitions < 1:
            raise UnsupportedCombination("repetitions must be >= 1")
        if self.workload in ITERATIVE and not self.allow_large and max(self.sizes) >= LARGE_N:
            raise UnsupportedCombination(
                f"{self.workload} at n >= {LARGE_N} needs allow_large (it runs n sequential operations)"
            )


@dataclass
class LatencySample:
    workload: str
    engine: str
    n: int
    r: int
    r_prime: int
    elapsed_ms: float
    op_count: int
    bytes_returned: int
    scan_stats: ScanStats = field(default_factory=ScanStats)

    def __post_init__(self) -> None:
        if not self.r >= self.r_prime >= 0:
            raise ValueError(f"need r >= r' >= 0, got r={self.r}, r'={self.r_prime}")
        if self.elapsed_ms < 0:
            raise ValueError("elapsed_ms must be >= 0")

    def to_row(self) -> dict[str, Any]:
        return {
            "workload": self.workload,
            "engine": self.engine,
            "n": self.n,
            "r": self.r,
            "r_prime": self.r_prime,
            "elapsed_ms": self.elapsed_ms,
            "op_count": self.op_count,
            "bytes": self.bytes_returned,
            "docs_examined": self.scan_stats.docs_examined,
            "index_comparisons": self.scan_stats.index_comparisons,
            "rows_scanned": self.scan_stats.rows_scanned,
        }

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "LatencySample":
        return cls(
            workload=row["workload"],
            engine=row["engine"],
            n=int(row["n"]),
            r=int(row["r"]),
            r_prime=int(row["r_prime"]),
            elapsed_ms=float(row["elapsed_ms"]),
            op_count=int(row["op_count"]),
            bytes_returned=int(row["bytes"]),
            scan_stats=ScanStats(
                int(row["docs_examined"]), int(row["index_comparisons"]), int(row["rows_scanned"])
            ),
        )


def _size(docs: Iterable[Document]) -> int:
    return sum(d.serialized_size() for d in docs)


def _row_size(rows: Iterable[dict], key_of: Callable[[dict], str]) -> int:
    return sum(Document(key_of(r), r).serialized_size() for r in rows)


@dataclass
class _Outcome:
    r: int
    r_prime: int
    ops: int
    bytes: int
    stats: ScanStats


class _Fixture:
    """One engine instance loaded with one dataset."""

    def __init__(self, engine: str, docs: list[Document], load: bool = True):
        self.engine = engine
        self.docs = docs
        self.keys = {d.fields["id"]: d.key for d in docs}
        cols = set(CHARGER_SCHEMA.names())
        self.rows = [{k: v for k, v in d.fields.items() if k in cols} for d in docs]
        if engine == "relstore":
            self.store = Table("chargers", CHARGER_SCHEMA)
            if load:
                self.store.bulk_load(self.rows)
        else:
            self.store = Collection("chargers")
            if load:
                self.store.bulk_load(docs)

    def key_of(self, row: dict) -> str:
        return self.keys[row["id"]]

    def first_id(self) -> int:
        return self.docs[0].fields["id"]


def _single_read_pk(fx: _Fixture) -> _Outcome:
    i = fx.first_id()
    if fx.engine == "relstore":
        rows, stats = fx.store.select([Condition("id", Op.EQ, i)])
        return _Outcome(len(rows), len(rows), 1, _row_size(rows, fx.key_of), stats)
    doc, stats = fx.store.get(fx.keys[i])
    return _Outcome(1, 1, 1, doc.serialized_size(), stats)


def _iterative_read_secondary(fx: _Fixture) -> _Outcome:
    total = ScanStats()
    r = nbytes = 0
    ids = [d.fields["id"] for d in fx.docs]
    if fx.engine == "relstore":
        for i in ids:
            rows, stats = fx.store.select([Condition("id", Op.EQ, i)])
            total += stats
            r += len(rows)
            nbytes += _row_size(rows, fx.key_of)
    else:
        for i in ids:
            docs, stats = fx.store.query([Condition("id", Op.EQ, i)])
            total += stats
            r += len(docs)
            nbytes += _size(docs)
    return _Outcome(r, r, len(ids), nbytes, total)


def _read_all(fx: _Fixture) -> _Outcome:
    if fx.engine == "relstore":
        rows, stats = fx.store.read_all()
        return _Outcome(len(rows), len(rows), 1, _row_size(rows, fx.key_of), stats)
    docs, stats = fx.store.read_all()
    return _Outcome(len(docs), len(docs), 1, _size(docs), stats)


def _single_update(fx: _Fixture) -> _Outcome:
    first = fx.docs[0]
    flipped = "level1" if first.fields.get("type") == "level2" else "level2"
    if fx.engine == "relstore":
        stats = fx.store.update_row(first.fields["id"], {"type": flipped})
    else:
        stats = fx.store.update(first.key, {"type": flipped})
    return _Outcome(0, 0, 1, 0, stats)


def _iterative_create(fx: _Fixture) -> _Outcome:
    total = ScanStats()
    if fx.engine == "relstore":
        for row in fx.rows:
            total += fx.store.insert_row(row)
    else:
        for doc in fx.docs:
            total += fx.store.insert(doc)
    return _Outcome(0, 0, len(fx.docs), 0, total)


def _read_all_filter(fx: _Fixture) -> _Outcome:
    if fx.engine == "relstore":
        rows, stats = fx.store.read_all()
        nbytes = _row_size(rows, fx.key_of)
    else:
        rows, stats = fx.store.read_all()
        nbytes = _size(rows)
    matched = filter_brute_force(rows, CANONICAL_QUERY)
    return _Outcome(len(rows), len(matched), 1, nbytes, stats)


def _read_range_filter(fx: _Fixture) -> _Outcome:
    docs, stats = fx.store.query(LATITUDE_RANGE)
    rest = [c for c in CANONICAL_QUERY if c.field != "latitude"]
    matched = filter_brute_force(docs, rest)
    return _Outcome(len(docs), len(matched), 1, _size(docs), stats)


def _multi_predicate(fx: _Fixture) -> _Outcome:
    rows, stats = fx.store.select(CANONICAL_QUERY)
    return _Outcome(len(rows), len(rows), 1, _row_size(rows, fx.key_of), stats)


_AST = parse(CHARGER_QUERY)


def _resolver_query(fx: _Fixture) -> _Outcome:
    result = execute(_AST, fx.store)
    return _Outcome(result.r, result.r_prime, 1, _size(result.documents), result.stats)


_RUNNERS = {
    "single_read_pk": _single_read_pk,
    "iterative_read_secondary": _iterative_read_secondary,
    "read_all": _read_all,
    "single_update": _single_update,
    "iterative_create": _iterative_create,
    "read_all_filter": _read_all_filter,
    "read_range_filter": _read_range_filter,
    "multi_predicate": _multi_predicate,
    "resolver_query": _resolver_query,
}


def run_once(workload: str, engine: str, docs: list[Document]) -> LatencySample:
    """Load ``docs`` into a fresh engine and time one execution of ``workload``."""
    if workload not in SUPPORTED.get(engine, ()):
        raise UnsupportedCombination(f"{workload} does not run on {engine}")
    fx = _Fixture(engine, docs, load=workload != "iterative_create")
    t0 = time.perf_counter()
    out = _RUNNERS[workload](fx)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return LatencySample(workload, engine, len(docs), out.r, out.r_prime, elapsed, out.ops, out.bytes, out.stats)


def run(spec: WorkloadSpec, data: list[Document] | None = None) -> list[LatencySample]:
    """One sample per (size, repetition).

    With ``data`` the given documents are used as the single dataset and
    ``spec.sizes`` is ignored.
    """
    samples = []
    datasets = [data] if data is not None else None
    sizes = [len(data)] if data is not None else list(spec.sizes)
    for n in sizes:
        docs = datasets[0] if datasets else documents(GenSpec(n=n, seed=spec.seed))
        if spec.workload in ITERATIVE and n >= LARGE_N and not spec.allow_large:
            raise UnsupportedCombination(f"{spec.workload} at n >= {LARGE_N} needs allow_large")
        for _ in range(spec.repetitions):
            samples.append(run_once(spec.workload, spec.engine, docs))
    return samples


# -- metrics ----------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    workload: str
    engine: str
    n: int | None  # None marks the mean row
    ms_per_op: float
    ops_per_s: float
    kb_per_s: float

    def to_row(self) -> dict[str, Any]:
        return {
            "workload": self.workload,
            "engine": self.engine,
            "n": "mean" if self.n is None else self.n,
            "ms_per_op": self.ms_per_op,
            "ops_per_s": self.ops_per_s,
            "kb_per_s": self.kb_per_s,
        }


METRICS_COLUMNS = ("workload", "engine", "n", "ms_per_op", "ops_per_s", "kb_per_s")


def ops_per_second(op_count: int, elapsed_ms: float) -> float:
    """Throughput; ``math.inf`` when nothing measurable elapsed."""
    if elapsed_ms <= 0:
        return math.inf
    return 1000.0 * op_count / elapsed_ms


def kb_per_second(r: int, elapsed_ms: float, avg_doc_bytes: float = AVG_DOC_BYTES) -> float:
    if r == 0:
        return 0.0
    if elapsed_ms <= 0:
        return math.inf
    return (r * avg_doc_bytes / 1024.0) / (elapsed_ms / 1000.0)


def metrics(samples: Sequence[LatencySample], avg_doc_bytes: float = AVG_DOC_BYTES) -> list[MetricsRow]:
    """Per-(workload, engine, n) rates plus one mean row per (workload, engine).

    Repetitions at the same n are pooled: their times, operation counts and
    result sizes are summed before dividing.
    """
    if not samples:
        raise EmptyInput("metrics needs at least one sample")
    groups: OrderedDict[tuple[str, str, int], list[LatencySample]] = OrderedDict()
    for s in samples:
        groups.setdefault((s.workload, s.engine, s.n), []).append(s)
    rows: list[MetricsRow] = []
    per_pair: OrderedDict[tuple[str, str], list[MetricsRow]] = OrderedDict()
    for (workload, engine, n), group in groups.items():
        elapsed = sum(s.elapsed_ms for s in group)
        ops = sum(s.op_count for s in group)
        r = sum(s.r for s in group)
        row = MetricsRow(
            workload,
            engine,
            n,
            ms_per_op=elapsed / ops if ops else 0.0,
            ops_per_s=ops_per_second(ops, elapsed),
            kb_per_s=kb_per_second(r, elapsed, avg_doc_bytes),
        )
        rows.append(row)
        per_pair.setdefault((workload, engine), []).append(row)
    for (workload, engine), pair_rows in per_pair.items():
        rows.append(
            MetricsRow(
                workload,
                engine,
                None,
                ms_per_op=_finite_mean([r.ms_per_op for r in pair_rows]),
                ops_per_s=_finite_mean([r.ops_per_s for r in pair_rows]),
                kb_per_s=_finite_mean([r.kb_per_s for r in pair_rows]),
            )
        )
    return rows


def _finite_mean(values: list[float]) -> float:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf if values else 0.0
    return sum(finite) / len(finite)


# -- export -----------------------------------------------------------------


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def export(items: Sequence[LatencySample | MetricsRow], fp: IO[str], fmt: str = "csv") -> int:
    """Write samples (or metrics rows) as CSV or JSON; returns rows written.

    An empty sequence is written as samples: a header-only CSV or ``[]``.
    """
    is_metrics = bool(items) and isinstance(items[0], MetricsRow)
    columns = METRICS_COLUMNS if is_metrics else CSV_COLUMNS
    rows = [it.to_row() for it in items]
    if fmt == "csv":
        w = csv.DictWriter(fp, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    elif fmt == "json":
        json.dump([{k: _json_safe(v) for k, v in row.items()} for row in rows], fp, indent=1)
        fp.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return len(rows)


def import_samples(fp: IO[str], fmt: str = "csv") -> list[LatencySample]:
    if fmt == "csv":
        return [LatencySample.from_row(row) for row in csv.DictReader(fp)]
    if fmt == "json":
        return [LatencySample.from_row(row) for row in json.load(fp)]
    raise ValueError(f"unknown format {fmt!r}")
