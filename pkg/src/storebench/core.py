"""Shared domain types, the brute-force predicate oracle, and JSON-lines I/O."""

from __future__ import annotations

import enum
import json
import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import IO, Any, Iterable, Iterator, Mapping, Sequence, Union

FieldValue = Union[str, int, float]

MAX_DOCUMENT_BYTES = 1 << 20


class StoreError(Exception):
    """Base class for every domain error raised by the engines.

    ``tag`` is a short machine-greppable name used by the CLI error line.
    """

    tag = "StoreError"


class InvalidValue(StoreError, ValueError):
    tag = "InvalidValue"


class DuplicateKey(StoreError):
    tag = "DuplicateKey"


class NotFound(StoreError, KeyError):
    tag = "NotFound"

    def __str__(self) -> str:  # KeyError repr-quotes its message otherwise
        return str(self.args[0]) if self.args else "not found"


class DocumentTooLarge(StoreError):
    tag = "DocumentTooLarge"


class Op(str, enum.Enum):
    EQ = "EQ"
    GE = "GE"
    LE = "LE"
    GT = "GT"
    LT = "LT"

    @property
    def is_inequality(self) -> bool:
        return self is not Op.EQ

    @property
    def is_lower_bound(self) -> bool:
        return self in (Op.GE, Op.GT)

    @property
    def is_upper_bound(self) -> bool:
        return self in (Op.LE, Op.LT)


_SYMBOLS = {Op.EQ: "==", Op.GE: ">=", Op.LE: "<=", Op.GT: ">", Op.LT: "<"}


def check_value(value: Any) -> FieldValue:
    """Reject anything that is not a finite number, an integer or text."""
    if isinstance(value, bool):
        raise InvalidValue(f"booleans are not field values: {value!r}")
    if isinstance(value, int) or isinstance(value, str):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidValue(f"non-finite number: {value!r}")
        return value
    raise InvalidValue(f"unsupported field value type {type(value).__name__}")


def value_kind(value: FieldValue) -> str:
    """``"text"`` or ``"number"``; ints and floats share one ordered domain."""
    return "text" if isinstance(value, str) else "number"


@dataclass(frozen=True)
class Document:
    key: str
    fields: Mapping[str, FieldValue]

    def __post_init__(self) -> None:
        if not isinstance(self.key, str) or not self.key:
            raise InvalidValue("document key must be a non-empty string")
        for name, value in self.fields.items():
            if not name:
                raise InvalidValue("field names must be non-empty")
            check_value(value)

    def get(self, name: str, default: Any = None) -> Any:
        return self.fields.get(name, default)

    def to_json(self) -> str:
        payload = {"_key": self.key}
        payload.update(self.fields)
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "Document":
        payload = json.loads(line)
        key = payload.pop("_key")
        return cls(key, payload)

    def serialized_size(self) -> int:
        return len(self.to_json().encode("utf-8"))

    def project(self, names: Sequence[str]) -> "Document":
        return Document(self.key, {n: self.fields[n] for n in names if n in self.fields})


@dataclass(frozen=True)
class Condition:
    field: str
    op: Op
    value: FieldValue

    def __post_init__(self) -> None:
        if not self.field:
            raise InvalidValue("condition field name must be non-empty")
        object.__setattr__(self, "op", Op(self.op))
        check_value(self.value)

    def __str__(self) -> str:
        return f"{self.field}{_SYMBOLS[self.op]}{self.value!r}"


@dataclass(frozen=True)
class QuerySpec:
    conditions: tuple[Condition, ...] = ()
    limit: int | None = None
    projection: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if self.projection is not None:
            object.__setattr__(self, "projection", tuple(self.projection))
            if any(not name for name in self.projection):
                raise InvalidValue("projection field names must be non-empty")
        if self.limit is not None and self.limit <= 0:
            raise InvalidValue("limit must be positive")
        seen: set[tuple[str, Op]] = set()
        for cond in self.conditions:
            if cond.op in (Op.GE, Op.LE):
                if (cond.field, cond.op) in seen:
                    raise InvalidValue(f"more than one {cond.op.value} on field {cond.field!r}")
                seen.add((cond.field, cond.op))

    def inequality_fields(self) -> list[str]:
        out: list[str] = []
        for cond in self.conditions:
            if cond.op.is_inequality and cond.field not in out:
                out.append(cond.field)
        return out


@dataclass(frozen=True)
class ChargerRecord:
    id: int
    name: str
    address: str
    latitude: float
    longitude: float
    type: str

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidValue(f"latitude out of range: {self.latitude}")
        if not -180.0 <= self.longitude <= 180.0:
            raise InvalidValue(f"longitude out of range: {self.longitude}")
        if self.type not in ("level1", "level2"):
            raise InvalidValue(f"unknown charger type {self.type!r}")

    def as_fields(self) -> dict[str, FieldValue]:
        return {
            "id": self.id,
            "name": self.name,
            "address": self.address,
            "latitude": self.latitude,
            "longitude": self.longitude,
            "type": self.type,
        }


@dataclass
class ScanStats:
    """Work counters; deterministic in (data, query)."""

    docs_examined: int = 0
    index_comparisons: int = 0
    rows_scanned: int = 0

    def __iadd__(self, other: "ScanStats") -> "ScanStats":
        self.docs_examined += other.docs_examined
        self.index_comparisons += other.index_comparisons
        self.rows_scanned += other.rows_scanned
        return self

    def __add__(self, other: "ScanStats") -> "ScanStats":
        out = ScanStats(self.docs_examined, self.index_comparisons, self.rows_scanned)
        out += other
        return out


def condition_matches(doc: Document | Mapping[str, Any], cond: Condition) -> bool:
    fields = doc.fields if isinstance(doc, Document) else doc
    if cond.field not in fields:
        return False
    stored = fields[cond.field]
    if value_kind(stored) != value_kind(cond.value):
        return False
    op = cond.op
    if op is Op.EQ:
        return stored == cond.value
    if op is Op.GE:
        return stored >= cond.value
    if op is Op.LE:
        return stored <= cond.value
    if op is Op.GT:
        return stored > cond.value
    return stored < cond.value


def filter_brute_force(docs: Iterable[Any], conditions: Iterable[Condition]) -> list:
    """Every document satisfying all conditions, in input order.

    Accepts documents or plain row mappings; this is the reference result
    every engine is checked against.
    """
    conds = list(conditions)
    return [d for d in docs if all(condition_matches(d, c) for c in conds)]


class RWLock:
    """Many readers or one writer."""

    def __init__(self) -> None:
        self._cond = threading.Condition(threading.Lock())
        self._readers = 0
        self._writer = False

    @contextmanager
    def read(self) -> Iterator[None]:
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if not self._readers:
                    self._cond.notify_all()

    @contextmanager
    def write(self) -> Iterator[None]:
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True
        try:
            yield
        finally:
            with self._cond:
                self._writer = False
                self._cond.notify_all()


def write_jsonl(docs: Iterable[Document], fp: IO[str], header: Mapping[str, Any] | None = None) -> int:
    count = 0
    if header is not None:
        fp.write(json.dumps(dict(header), separators=(",", ":")) + "\n")
    for doc in docs:
        fp.write(doc.to_json() + "\n")
        count += 1
    return count


def read_jsonl(fp: IO[str]) -> tuple[dict[str, Any] | None, list[Document]]:
    """Read documents, returning ``(header, docs)``.

    The first line is a header when it carries no ``_key``.
    """
    header = None
    docs: list[Document] = []
    for lineno, line in enumerate(fp):
        line = line.strip()
        if not line:
            continue
        payload = json.loads(line)
        if "_key" not in payload:
            if lineno == 0 and header is None:
                header = payload
                continue
            raise InvalidValue(f"line {lineno + 1}: record without _key")
        key = payload.pop("_key")
        docs.append(Document(key, payload))
    return header, docs


# The benchmark's query pattern: two equalities and two ranges.
CANONICAL_QUERY: tuple[Condition, ...] = (
    Condition("name", Op.EQ, "Howard"),
    Condition("latitude", Op.GE, 47.5),
    Condition("latitude", Op.LE, 48.0),
    Condition("longitude", Op.GE, -122.5),
    Condition("longitude", Op.LE, -122.1),
    Condition("type", Op.EQ, "level2"),
)
LATITUDE_RANGE: tuple[Condition, ...] = CANONICAL_QUERY[1:3]
