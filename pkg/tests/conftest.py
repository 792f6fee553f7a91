import pytest

from storebench.core import CANONICAL_QUERY, Document
from storebench.datagen import GenSpec, documents
from storebench.docstore import Collection
from storebench.relstore import CHARGER_SCHEMA, Table

F3_FIELDS = [
    {"id": 1, "name": "Howard", "address": "11899 118th Ave", "latitude": 47.9, "longitude": -122.5, "type": "level2"},
    {"id": 2, "name": "Gomez", "address": "10000 Cedar Ct", "latitude": 43.19, "longitude": -124.9, "type": "level1"},
    {"id": 3, "name": "Howard", "address": "11000 119th Ave", "latitude": 47.9, "longitude": -120.1, "type": "level2"},
]
F3_KEYS = ["1_11899118thAve", "2_10000CedarCt", "3_11000119thAve"]


@pytest.fixture
def f3_docs():
    return [Document(k, dict(f)) for k, f in zip(F3_KEYS, F3_FIELDS)]


@pytest.fixture
def f3_coll(f3_docs):
    coll = Collection("f3")
    for d in f3_docs:
        coll.insert(d)
    return coll


@pytest.fixture
def f3_table():
    table = Table("f3", CHARGER_SCHEMA)
    for row in F3_FIELDS:
        table.insert_row(dict(row))
    return table


@pytest.fixture
def q_star():
    return list(CANONICAL_QUERY)


@pytest.fixture(scope="session")
def docs_10k():
    return documents(GenSpec(n=10_000, seed=7))


def keys_of(docs):
    return {d.key for d in docs}


def chain_query(order, args, leaves=("id", "name", "address", "latitude", "longitude", "type")):
    """Query text nesting ``order`` as a chain with ``args`` on the root."""

    def lit(v):
        return f"'{v}'" if isinstance(v, str) else repr(v)

    arg_text = ", ".join(f"{k}: {lit(v)}" for k, v in args.items())
    head = f"{order[0]}({arg_text})" if arg_text else order[0]
    inner = " ".join(leaves)
    for name in reversed(order[1:]):
        inner = f"{name} {{ {inner} }}"
    return f"query {{ {head} {{ {inner} }} }}"


# -- acceptance reporting -------------------------------------------------------

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
