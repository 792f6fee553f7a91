"""Schema-enforced relational tables without secondary indexes.

Selects scan every row unless an equality on the primary key is present,
in which case the row is fetched directly. Any number of range conditions
may be combined; results are always the exact matches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Any, Iterable, Mapping

from .core import (
    Condition,
    Document,
    DuplicateKey,
    InvalidValue,
    NotFound,
    Op,
    RWLock,
    ScanStats,
    StoreError,
    condition_matches,
)

COLUMN_TYPES = ("text", "number", "integer")


class DuplicateTable(StoreError):
    tag = "DuplicateTable"


class InvalidSchema(StoreError):
    tag = "InvalidSchema"


class UnknownColumn(StoreError):
    tag = "UnknownColumn"


class SchemaViolation(StoreError):
    tag = "SchemaViolation"

    def __init__(self, column: str, reason: str):
        self.column = column
        self.reason = reason
        super().__init__(f"{column}: {reason}")


@dataclass(frozen=True)
class Column:
    name: str
    type: str
    required: bool = True


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    primary_key: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if not names:
            raise InvalidSchema("schema has no columns")
        if any(not n for n in names):
            raise InvalidSchema("column names must be non-empty")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise InvalidSchema("duplicate column(s): " + ", ".join(dupes))
        for c in self.columns:
            if c.type not in COLUMN_TYPES:
                raise InvalidSchema(f"column {c.name!r} has unknown type {c.type!r}")
        pk = self.column(self.primary_key)
        if pk is None:
            raise InvalidSchema(f"primary key {self.primary_key!r} is not a column")
        if not pk.required:
            raise InvalidSchema("primary key column must be required")

    def column(self, name: str) -> Column | None:
        for c in self.columns:
            if c.name == name:
                return c
        return None

    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def to_header(self) -> dict[str, Any]:
        return {
            "columns": [{"name": c.name, "type": c.type, "required": c.required} for c in self.columns],
            "primary_key": self.primary_key,
        }

    @classmethod
    def from_header(cls, header: Mapping[str, Any]) -> "Schema":
        try:
            cols = tuple(
                Column(c["name"], c["type"], c.get("required", True)) for c in header["columns"]
            )
            return cls(cols, header["primary_key"])
        except (KeyError, TypeError) as exc:
            raise InvalidSchema(f"malformed schema header: {exc}") from None


CHARGER_SCHEMA = Schema(
    (
        Column("id", "integer"),
        Column("name", "text"),
        Column("address", "text"),
        Column("latitude", "number"),
        Column("longitude", "number"),
        Column("type", "text"),
    ),
    primary_key="id",
)


def _type_ok(column: Column, value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if column.type == "text":
        return isinstance(value, str)
    if column.type == "integer":
        return isinstance(value, int)
    return isinstance(value, int) or (isinstance(value, float) and math.isfinite(value))


class Table:
    def __init__(self, name: str, schema: Schema):
        if not name:
            raise InvalidValue("table name must be non-empty")
        self.name = name
        self.schema = schema
        self._rows: dict[Any, dict[str, Any]] = {}
        self._lock = RWLock()

    def __len__(self) -> int:
        return len(self._rows)

    def _check_row(self, row: Mapping[str, Any]) -> None:
        for name in row:
            if self.schema.column(name) is None:
                raise SchemaViolation(name, "unknown column")
        for col in self.schema.columns:
            if col.name not in row:
                if col.required:
                    raise SchemaViolation(col.name, "missing")
                continue
            if not _type_ok(col, row[col.name]):
                raise SchemaViolation(col.name, f"type (expected {col.type}, got {type(row[col.name]).__name__})")

    def insert_row(self, row: Mapping[str, Any]) -> ScanStats:
        self._check_row(row)
        with self._lock.write():
            pk = row[self.schema.primary_key]
            if pk in self._rows:
                raise DuplicateKey(str(pk))
            self._rows[pk] = dict(row)
        return ScanStats(rows_scanned=0)

    def bulk_load(self, rows: Iterable[Mapping[str, Any]]) -> int:
        added = 0
        for row in rows:
            self.insert_row(row)
            added += 1
        return added

    def update_row(self, key: Any, changed: Mapping[str, Any]) -> ScanStats:
        with self._lock.write():
            current = self._rows.get(key)
            if current is None:
                raise NotFound(str(key))
            candidate = dict(current)
            candidate.update(changed)
            self._check_row(candidate)
            if candidate[self.schema.primary_key] != key:
                raise SchemaViolation(self.schema.primary_key, "primary key is immutable")
            self._rows[key] = candidate
        return ScanStats(docs_examined=1, rows_scanned=1)

    def select(self, conditions: Iterable[Condition]) -> tuple[list[dict[str, Any]], ScanStats]:
        conds = list(conditions)
        for c in conds:
            if self.schema.column(c.field) is None:
                raise UnknownColumn(c.field)
        pk = self.schema.primary_key
        with self._lock.read():
            key_cond = next((c for c in conds if c.field == pk and c.op is Op.EQ), None)
            if key_cond is not None:
                row = self._rows.get(key_cond.value)
                candidates = [row] if row is not None else []
            else:
                candidates = list(self._rows.values())
            out = [dict(r) for r in candidates if all(condition_matches(r, c) for c in conds)]
        n = len(candidates)
        return out, ScanStats(docs_examined=n, rows_scanned=n)

    def read_all(self) -> tuple[list[dict[str, Any]], ScanStats]:
        with self._lock.read():
            rows = [dict(r) for r in self._rows.values()]
        return rows, ScanStats(docs_examined=len(rows), rows_scanned=len(rows))

    def dump(self, fp: IO[str], key_of=None) -> int:
        """Write the schema header then one row per line.

        ``key_of`` maps a row to its ``_key``; defaults to the primary key.
        """
        fp.write(json.dumps({"table": self.name, **self.schema.to_header()}, separators=(",", ":")) + "\n")
        count = 0
        with self._lock.read():
            for pk, row in self._rows.items():
                key = key_of(row) if key_of else str(pk)
                fp.write(Document(key, row).to_json() + "\n")
                count += 1
        return count

    @classmethod
    def load(cls, fp: IO[str], name: str | None = None) -> "Table":
        first = fp.readline()
        header = json.loads(first)
        if "columns" not in header:
            raise InvalidSchema("table file must start with a schema header")
        table = cls(name or header.get("table", "table"), Schema.from_header(header))
        for line in fp:
            line = line.strip()
            if line:
                payload = json.loads(line)
                payload.pop("_key", None)
                table.insert_row(payload)
        return table


class RelStore:
    def __init__(self) -> None:
        self._tables: dict[str, Table] = {}

    def create_table(self, name: str, schema: Schema) -> Table:
        if not isinstance(schema, Schema):
            raise InvalidSchema("schema must be a Schema")
        if name in self._tables:
            raise DuplicateTable(name)
        table = self._tables[name] = Table(name, schema)
        return table

    def table(self, name: str) -> Table:
        try:
            return self._tables[name]
        except KeyError:
            raise NotFound(name) from None
