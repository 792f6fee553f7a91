"""In-memory document store with automatic per-field secondary indices.

Every field of every document is indexed. A query may put range
conditions on at most one field; equality conditions on other fields are
checked per candidate drawn from the range. Work is reported through
:class:`~storebench.core.ScanStats` so complexity can be asserted without
timing anything.
"""

from __future__ import annotations

from typing import IO, Iterable, Mapping

from .core import (
    MAX_DOCUMENT_BYTES,
    Condition,
    Document,
    DocumentTooLarge,
    DuplicateKey,
    FieldValue,
    InvalidValue,
    NotFound,
    Op,
    QuerySpec,
    RWLock,
    ScanStats,
    StoreError,
    check_value,
    condition_matches,
    read_jsonl,
    value_kind,
    write_jsonl,
)


class DuplicateCollection(StoreError):
    tag = "DuplicateCollection"


class MultipleInequalityFields(StoreError):
    tag = "MultipleInequalityFields"

    def __init__(self, fields: list[str]):
        self.fields = list(fields)
        super().__init__(
            "inequality conditions on more than one field: " + ", ".join(self.fields)
        )


class SortedIndex:
    """Entries ``(value, key)`` kept sorted in two parallel lists.

    Values in one index share a kind (all numbers or all text), so
    comparisons never cross types. Every binary-search probe adds one to
    the ``comparisons`` counter handed in by the caller.
    """

    __slots__ = ("values", "keys")

    def __init__(self) -> None:
        self.values: list[FieldValue] = []
        self.keys: list[str] = []

    def __len__(self) -> int:
        return len(self.values)

    def lower_bound(self, value: FieldValue, stats: ScanStats) -> int:
        lo, hi = 0, len(self.values)
        values = self.values
        while lo < hi:
            mid = (lo + hi) // 2
            stats.index_comparisons += 1
            if values[mid] < value:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def upper_bound(self, value: FieldValue, stats: ScanStats) -> int:
        lo, hi = 0, len(self.values)
        values = self.values
        while lo < hi:
            mid = (lo + hi) // 2
            stats.index_comparisons += 1
            if value < values[mid]:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def _position(self, value: FieldValue, key: str, stats: ScanStats) -> int:
        lo, hi = 0, len(self.values)
        values, keys = self.values, self.keys
        while lo < hi:
            mid = (lo + hi) // 2
            stats.index_comparisons += 1
            v = values[mid]
            if v < value or (v == value and keys[mid] < key):
                lo = mid + 1
            else:
                hi = mid
        return lo

    def add(self, value: FieldValue, key: str, stats: ScanStats) -> None:
        pos = self._position(value, key, stats)
        self.values.insert(pos, value)
        self.keys.insert(pos, key)

    def remove(self, value: FieldValue, key: str, stats: ScanStats) -> None:
        pos = self._position(value, key, stats)
        if pos >= len(self.keys) or self.keys[pos] != key or self.values[pos] != value:
            raise AssertionError(f"index entry ({value!r}, {key!r}) missing")
        del self.values[pos]
        del self.keys[pos]

    def rebuild(self, entries: Iterable[tuple[FieldValue, str]]) -> None:
        ordered = sorted(entries)
        self.values = [v for v, _ in ordered]
        self.keys = [k for _, k in ordered]


def _fits(doc: Document) -> bool:
    # Cheap bound first: a JSON-escaped char never takes more than 6 bytes.
    rough = len(doc.key) + 16
    for name, value in doc.fields.items():
        rough += len(name) + (len(value) if isinstance(value, str) else 24) + 4
    if 6 * rough < MAX_DOCUMENT_BYTES:
        return True
    return doc.serialized_size() <= MAX_DOCUMENT_BYTES


class Collection:
    """A schemaless, key-addressed set of documents.

    Readers may run concurrently; writers are exclusive.
    """

    def __init__(self, name: str):
        if not name:
            raise InvalidValue("collection name must be non-empty")
        self.name = name
        self._docs: dict[str, Document] = {}
        # field -> kind ("number" | "text") -> index
        self._indices: dict[str, dict[str, SortedIndex]] = {}
        self._lock = RWLock()

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, key: str) -> bool:
        return key in self._docs

    # -- writes ---------------------------------------------------------

    def _index(self, name: str, value: FieldValue) -> SortedIndex:
        per_kind = self._indices.setdefault(name, {})
        kind = value_kind(value)
        idx = per_kind.get(kind)
        if idx is None:
            idx = per_kind[kind] = SortedIndex()
        return idx

    def insert(self, doc: Document) -> ScanStats:
        stats = ScanStats()
        if not _fits(doc):
            raise DocumentTooLarge(f"document {doc.key!r} exceeds {MAX_DOCUMENT_BYTES} bytes")
        with self._lock.write():
            if doc.key in self._docs:
                raise DuplicateKey(doc.key)
            doc = Document(doc.key, dict(doc.fields))
            self._docs[doc.key] = doc
            for name, value in doc.fields.items():
                self._index(name, value).add(value, doc.key, stats)
        return stats

    def bulk_load(self, docs: Iterable[Document]) -> int:
        """Insert many documents, sorting each index once at the end.

        Faster than repeated :meth:`insert` for setup; no work counters.
        """
        staged: dict[tuple[str, str], list[tuple[FieldValue, str]]] = {}
        added = 0
        with self._lock.write():
            for doc in docs:
                if doc.key in self._docs:
                    raise DuplicateKey(doc.key)
                if not _fits(doc):
                    raise DocumentTooLarge(f"document {doc.key!r} exceeds {MAX_DOCUMENT_BYTES} bytes")
                self._docs[doc.key] = doc
                for name, value in doc.fields.items():
                    staged.setdefault((name, value_kind(value)), []).append((value, doc.key))
                added += 1
            for (name, kind), entries in staged.items():
                per_kind = self._indices.setdefault(name, {})
                idx = per_kind.setdefault(kind, SortedIndex())
                entries.extend(zip(idx.values, idx.keys))
                idx.rebuild(entries)
        return added

    def update(self, key: str, changed: Mapping[str, FieldValue]) -> ScanStats:
        stats = ScanStats()
        for value in changed.values():
            check_value(value)
        with self._lock.write():
            old = self._docs.get(key)
            if old is None:
                raise NotFound(key)
            fields = dict(old.fields)
            fields.update(changed)
            new = Document(key, fields)
            if not _fits(new):
                raise DocumentTooLarge(f"document {key!r} exceeds {MAX_DOCUMENT_BYTES} bytes")
            stats.docs_examined = 1
            for name, value in changed.items():
                if name in old.fields:
                    prev = old.fields[name]
                    if prev == value and value_kind(prev) == value_kind(value) and type(prev) is type(value):
                        continue
                    self._index(name, prev).remove(prev, key, stats)
                self._index(name, value).add(value, key, stats)
            self._docs[key] = new
        return stats

    # -- reads ----------------------------------------------------------

    def get(self, key: str) -> tuple[Document, ScanStats]:
        with self._lock.read():
            doc = self._docs.get(key)
        if doc is None:
            err = NotFound(key)
            err.stats = ScanStats()
            raise err
        return doc, ScanStats(docs_examined=1)

    def read_all(self) -> tuple[list[Document], ScanStats]:
        with self._lock.read():
            docs = list(self._docs.values())
        return docs, ScanStats(docs_examined=len(docs))

    def query(self, spec: QuerySpec | Iterable[Condition]) -> tuple[list[Document], ScanStats]:
        if not isinstance(spec, QuerySpec):
            spec = QuerySpec(tuple(spec))
        ranged = spec.inequality_fields()
        if len(ranged) > 1:
            raise MultipleInequalityFields(ranged)
        stats = ScanStats()
        with self._lock.read():
            if ranged:
                keys, used = self._range_candidates(ranged[0], spec.conditions, stats)
            elif spec.conditions:
                keys, used = self._equality_candidates(spec.conditions, stats)
            else:
                keys, used = list(self._docs), ()
            stats.docs_examined = len(keys)
            rest = [c for c in spec.conditions if c.field not in used]
            docs = self._docs
            out = []
            for key in keys:
                doc = docs[key]
                if all(condition_matches(doc, c) for c in rest):
                    out.append(doc)
                    if spec.limit is not None and len(out) >= spec.limit:
                        break
        if spec.projection is not None:
            out = [d.project(spec.projection) for d in out]
        return out, stats

    def _bounds(self, name: str, conds: list[Condition], stats: ScanStats) -> list[str]:
        kinds = {value_kind(c.value) for c in conds}
        if len(kinds) != 1:
            return []
        idx = self._indices.get(name, {}).get(kinds.pop())
        if idx is None:
            return []
        start, end = 0, len(idx)
        for c in conds:
            if c.op is Op.GE or c.op is Op.EQ:
                start = max(start, idx.lower_bound(c.value, stats))
            elif c.op is Op.GT:
                start = max(start, idx.upper_bound(c.value, stats))
            if c.op is Op.LE or c.op is Op.EQ:
                end = min(end, idx.upper_bound(c.value, stats))
            elif c.op is Op.LT:
                end = min(end, idx.lower_bound(c.value, stats))
        return idx.keys[start:end] if start < end else []

    def _range_candidates(self, name, conditions, stats):
        conds = [c for c in conditions if c.field == name]
        return self._bounds(name, conds, stats), (name,)

    def _equality_candidates(self, conditions, stats):
        by_field: dict[str, list[Condition]] = {}
        for c in conditions:
            by_field.setdefault(c.field, []).append(c)
        best: list[str] | None = None
        best_field = None
        for name, conds in by_field.items():
            keys = self._bounds(name, conds, stats)
            if best is None or len(keys) < len(best):
                best, best_field = keys, name
        return best or [], (best_field,)

    # -- introspection --------------------------------------------------

    def index_fields(self) -> list[str]:
        return sorted(self._indices)

    def index_entries(self, name: str) -> list[tuple[FieldValue, str]]:
        """All entries for a field in index order (numbers before text)."""
        out: list[tuple[FieldValue, str]] = []
        per_kind = self._indices.get(name, {})
        for kind in ("number", "text"):
            idx = per_kind.get(kind)
            if idx is not None:
                out.extend(zip(idx.values, idx.keys))
        return out

    def descending(self, name: str) -> list[tuple[FieldValue, str]]:
        return self.index_entries(name)[::-1]

    # -- snapshots ------------------------------------------------------

    def dump(self, fp: IO[str]) -> int:
        with self._lock.read():
            docs = list(self._docs.values())
        return write_jsonl(docs, fp, header={"collection": self.name, "count": len(docs)})

    @classmethod
    def load(cls, fp: IO[str], name: str | None = None) -> "Collection":
        header, docs = read_jsonl(fp)
        if name is None:
            name = (header or {}).get("collection") or "collection"
        coll = cls(name)
        coll.bulk_load(docs)
        if header and "count" in header and header["count"] != len(coll):
            raise InvalidValue(f"snapshot header says {header['count']} docs, found {len(coll)}")
        return coll


class DocStore:
    """Registry of named collections."""

    def __init__(self) -> None:
        self._collections: dict[str, Collection] = {}

    def create_collection(self, name: str) -> Collection:
        if not name:
            raise InvalidValue("collection name must be non-empty")
        if name in self._collections:
            raise DuplicateCollection(name)
        coll = self._collections[name] = Collection(name)
        return coll

    def collection(self, name: str) -> Collection:
        try:
            return self._collections[name]
        except KeyError:
            raise NotFound(name) from None

    def names(self) -> list[str]:
        return list(self._collections)
