import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from storebench.core import Condition, DuplicateKey, NotFound, Op, filter_brute_force
from storebench.datagen import GenSpec, documents
from storebench.docstore import Collection
from storebench.relstore import (
    CHARGER_SCHEMA,
    Column,
    DuplicateTable,
    InvalidSchema,
    RelStore,
    Schema,
    SchemaViolation,
    Table,
    UnknownColumn,
)

from conftest import F3_FIELDS


def _ids(rows):
    return {r["id"] for r in rows}


def test_create_table():
    store = RelStore()
    t = store.create_table("chargers", CHARGER_SCHEMA)
    assert t.read_all()[0] == []
    with pytest.raises(DuplicateTable):
        store.create_table("chargers", CHARGER_SCHEMA)
    assert store.table("chargers") is t


def test_invalid_schemas():
    with pytest.raises(InvalidSchema):
        Schema((Column("a", "text"), Column("a", "number")), "a")
    with pytest.raises(InvalidSchema):
        Schema((Column("a", "text"),), "b")
    with pytest.raises(InvalidSchema):
        Schema((Column("a", "text", required=False),), "a")
    with pytest.raises(InvalidSchema):
        Schema((Column("a", "blob"),), "a")


def test_insert_row_examples(f3_table):
    t = Table("t", CHARGER_SCHEMA)
    t.insert_row(dict(F3_FIELDS[0]))
    with pytest.raises(SchemaViolation) as info:
        t.insert_row({**F3_FIELDS[1], "latitude": "north"})
    assert info.value.column == "latitude" and info.value.reason.startswith("type")
    row = dict(F3_FIELDS[1])
    del row["type"]
    with pytest.raises(SchemaViolation) as info:
        t.insert_row(row)
    assert str(info.value) == "type: missing"
    with pytest.raises(DuplicateKey):
        t.insert_row(dict(F3_FIELDS[0]))
    assert len(t) == 1


def test_rejects_unknown_column_and_bool():
    t = Table("t", CHARGER_SCHEMA)
    with pytest.raises(SchemaViolation):
        t.insert_row({**F3_FIELDS[0], "rating": 3})
    with pytest.raises(SchemaViolation):
        t.insert_row({**F3_FIELDS[0], "id": True})
    with pytest.raises(SchemaViolation):
        t.insert_row({**F3_FIELDS[0], "id": 1.5})


def test_select_examples(f3_table, q_star):
    rows, stats = f3_table.select(q_star)
    assert _ids(rows) == {1}
    assert stats.rows_scanned == 3
    rows, stats = f3_table.select([Condition("id", Op.EQ, 2)])
    assert _ids(rows) == {2}
    assert stats.rows_scanned == 1
    with pytest.raises(UnknownColumn):
        f3_table.select([Condition("rating", Op.GE, 3)])


def test_pk_lookup_with_extra_conditions(f3_table):
    rows, stats = f3_table.select([Condition("id", Op.EQ, 1), Condition("type", Op.EQ, "level1")])
    assert rows == [] and stats.rows_scanned == 1
    rows, stats = f3_table.select([Condition("id", Op.EQ, 99)])
    assert rows == [] and stats.rows_scanned == 0


def test_many_inequality_fields_allowed(f3_table):
    rows, _ = f3_table.select([Condition("latitude", Op.GE, 47.5), Condition("longitude", Op.LE, -122.1)])
    assert _ids(rows) == {1}


def test_update_row(f3_table, q_star):
    f3_table.update_row(1, {"type": "level1"})
    assert f3_table.select(q_star)[0] == []
    with pytest.raises(NotFound):
        f3_table.update_row(99, {"type": "level1"})
    before = f3_table.read_all()[0]
    with pytest.raises(SchemaViolation):
        f3_table.update_row(2, {"name": "Singh", "latitude": "x"})
    assert f3_table.read_all()[0] == before
    with pytest.raises(SchemaViolation):
        f3_table.update_row(2, {"id": 7})


def test_read_all(f3_table, docs_10k):
    rows, stats = f3_table.read_all()
    assert len(rows) == 3 and stats.rows_scanned == 3
    t = Table("t", CHARGER_SCHEMA)
    t.bulk_load(d.fields for d in docs_10k)
    assert t.read_all()[1].rows_scanned == 10_000


def test_returned_rows_are_copies(f3_table):
    rows, _ = f3_table.read_all()
    rows[0]["name"] = "Mallory"
    assert f3_table.read_all()[0][0]["name"] == "Howard"


def test_dump_load_round_trip(f3_table):
    buf = io.StringIO()
    f3_table.dump(buf)
    header = buf.getvalue().splitlines()[0]
    assert '"primary_key":"id"' in header and '"columns":' in header
    buf.seek(0)
    again = Table.load(buf)
    assert again.schema == CHARGER_SCHEMA
    assert again.read_all()[0] == f3_table.read_all()[0]


def test_load_requires_header():
    with pytest.raises(InvalidSchema):
        Table.load(io.StringIO('{"_key":"1","id":1}\n'))


# -- properties ---------------------------------------------------------------


def _random_conditions(rnd: random.Random) -> list[Condition]:
    pool = [
        lambda: Condition("latitude", rnd.choice(list(Op)), rnd.choice([43.19, 45.545, 47.9, rnd.uniform(43, 48)])),
        lambda: Condition("longitude", rnd.choice(list(Op)), rnd.choice([-124.9, -122.5, rnd.uniform(-125, -120)])),
        lambda: Condition("name", Op.EQ, rnd.choice(["Howard", "Singh", "Zed"])),
        lambda: Condition("type", rnd.choice([Op.EQ, Op.GE]), rnd.choice(["level1", "level2"])),
        lambda: Condition("id", rnd.choice(list(Op)), rnd.randint(0, 300)),
        lambda: Condition("address", Op.LT, rnd.choice(["10500", "11", "2"])),
    ]
    return [rnd.choice(pool)() for _ in range(rnd.randint(0, 5))]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 300), st.integers(0, 2**32), st.integers(0, 2**32))
def test_differential_vs_brute_force(n, seed, qseed):
    rows = [d.fields for d in documents(GenSpec(n=n, seed=seed))]
    t = Table("t", CHARGER_SCHEMA)
    t.bulk_load(rows)
    rnd = random.Random(qseed)
    for _ in range(5):
        conds = _random_conditions(rnd)
        got, stats = t.select(conds)
        assert _ids(got) == _ids(filter_brute_force(rows, conds))
        if not any(c.field == "id" and c.op is Op.EQ for c in conds):
            assert stats.rows_scanned == n


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 500), st.integers(0, 2**32))
def test_cross_engine_canonical_query(n, seed):
    from storebench.core import CANONICAL_QUERY, LATITUDE_RANGE

    docs = documents(GenSpec(n=n, seed=seed))
    t = Table("t", CHARGER_SCHEMA)
    t.bulk_load(d.fields for d in docs)
    coll = Collection("c")
    coll.bulk_load(docs)
    rel, _ = t.select(CANONICAL_QUERY)
    ranged, _ = coll.query(LATITUDE_RANGE)
    reduced = filter_brute_force(ranged, CANONICAL_QUERY[3:] + CANONICAL_QUERY[:1])
    assert _ids(rel) == {d.fields["id"] for d in reduced}


@given(
    st.lists(
        st.tuples(
            st.integers(1, 8),
            st.dictionaries(
                st.sampled_from(CHARGER_SCHEMA.names()),
                st.one_of(st.integers(-2, 2), st.sampled_from([0.5, 1e300, "x", "", True])),
                max_size=3,
            ),
        ),
        max_size=12,
    )
)
def test_schema_never_violated(ops):
    t = Table("t", CHARGER_SCHEMA)
    for key, changes in ops:
        try:
            if key in {r["id"] for r in t.read_all()[0]}:
                t.update_row(key, changes)
            else:
                t.insert_row({**F3_FIELDS[0], **changes, "id": key})
        except (SchemaViolation, DuplicateKey):
            pass
    for row in t.read_all()[0]:
        t2 = Table("check", CHARGER_SCHEMA)
        t2.insert_row(row)
