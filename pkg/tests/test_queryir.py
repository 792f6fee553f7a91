import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from storebench.core import CANONICAL_QUERY, filter_brute_force
from storebench.datagen import GenSpec, documents
from storebench.docstore import Collection
from storebench.queryir import (
    CHARGER_API,
    CHARGER_QUERY,
    BackendError,
    FieldNode,
    QueryAst,
    QuerySyntaxError,
    UnvalidatedAst,
    execute,
    explain,
    parse,
    to_text,
    validate,
)

from conftest import chain_query, keys_of

LEAVES = ["id", "name", "address", "latitude", "longitude", "type"]
Q_ARGS = {"latmin": 47.5, "latmax": 48.0, "longmin": -122.5, "longmax": -122.1, "name": "Howard", "type": "level2"}


def test_parse_reference_query():
    ast = parse(CHARGER_QUERY)
    assert ast.root.name == "latitude"
    assert len(ast.root.args) == 7
    assert ast.root.args["num"] == 1000000 and ast.root.args["name"] == "Howard"
    assert [n.name for n in ast.chain()] == ["latitude", "longitude", "name", "type"]
    assert ast.chain()[-1].selections == LEAVES


def test_parse_minimal_query():
    ast = parse("query { latitude(latmin: 0.0, latmax: 1.0) { id } }")
    assert ast.root.args == {"latmin": 0.0, "latmax": 1.0}
    assert ast.root.selections == ["id"]


def test_syntax_error_position():
    with pytest.raises(QuerySyntaxError) as info:
        parse("query { latitude( }")
    assert (info.value.line, info.value.column) == (1, 19)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "query {",
        "query { }",
        "latitude { id }",
        "query { latitude { } }",
        "query { latitude(latmin 1) { id } }",
        "query { latitude(latmin: 1, latmin: 2) { id } }",
        "query { latitude { id } } extra",
        "query { latitude { id longitude { id } } }",
    ],
)
def test_malformed_queries(text):
    with pytest.raises(QuerySyntaxError):
        parse(text)


def test_error_position_on_later_line():
    with pytest.raises(QuerySyntaxError) as info:
        parse("query {\n  latitude(latmin: 1)\n    { id ) }\n}")
    assert info.value.line == 3


def test_literals():
    ast = parse("query { name(name: Howard, type: \"level2\", num: -3, latmin: 1e2) { id } }")
    assert ast.root.args == {"name": "Howard", "type": "level2", "num": -3, "latmin": 100.0}


def test_validate_examples():
    assert validate(parse(CHARGER_QUERY)) == []
    v = validate(parse("query { foo { id } }"))
    assert [(x.kind, x.path) for x in v] == [("UnknownField", "foo")]
    v = validate(parse('query { latitude(latmin: "abc") { id } }'))
    assert [(x.kind, x.path) for x in v] == [("ArgTypeMismatch", "latitude.latmin")]


def test_validate_reports_everything():
    text = 'query { latitude(bogus: 1, latmin: "x") { longitude { foo { id } } } }'
    kinds = sorted(v.kind for v in validate(parse(text)))
    assert kinds == ["ArgTypeMismatch", "UnknownArg", "UnknownField"]


def test_validate_more_kinds():
    kinds = lambda t: sorted(v.kind for v in validate(parse(t)))  # noqa: E731
    assert kinds("query { latitude { latitude { id } } }") == ["RepeatedField", "UnknownField"]
    assert kinds("query { latitude { type { zip } } }") == ["UnknownSelection"]
    assert kinds("query { latitude(name: 'a') { id } }") == ["UnresolvedArg"]
    assert kinds("query { latitude(latmin: 1) { type(latmin: 2) { id } } }") == ["DuplicateArg"]


def test_siblings_parse_but_fail_validation():
    ast = QueryAst(FieldNode("latitude", children=[FieldNode("name", selections=["id"]), FieldNode("type", selections=["id"])]))
    assert [v.kind for v in validate(ast)] == ["SiblingFields"]
    with pytest.raises(UnvalidatedAst):
        execute(ast, Collection("c"))


def test_execute_on_f3(f3_coll):
    result = execute(parse(CHARGER_QUERY), f3_coll)
    assert result.levels == [("latitude", 2), ("longitude", 1), ("name", 1), ("type", 1)]
    assert [d.key for d in result.documents] == ["1_11899118thAve"]
    assert list(result.documents[0].fields) == LEAVES
    assert (result.r, result.r_prime) == (2, 1)
    assert result.sidecar() == {
        "levels": [
            {"field": "latitude", "count": 2},
            {"field": "longitude", "count": 1},
            {"field": "name", "count": 1},
            {"field": "type", "count": 1},
        ]
    }


def test_root_level_set_on_f3(f3_coll):
    ast = parse(chain_query(["latitude"], {"latmin": 47.5, "latmax": 48.0}))
    assert keys_of(execute(ast, f3_coll).documents) == {"1_11899118thAve", "3_11000119thAve"}


def test_execute_empty_collection():
    result = execute(parse(CHARGER_QUERY), Collection("e"))
    assert result.documents == [] and all(c == 0 for _, c in result.levels)


def test_num_hint_only_warns(f3_coll):
    result = execute(parse(CHARGER_QUERY), f3_coll)
    assert len(result.warnings) == 1 and "num=1000000" in result.warnings[0]


def test_backend_errors_are_wrapped():
    class Broken:
        def __len__(self):
            return 0

        def query(self, spec):
            from storebench.docstore import MultipleInequalityFields

            raise MultipleInequalityFields(["a", "b"])

    with pytest.raises(BackendError):
        execute(parse(CHARGER_QUERY), Broken())


def test_explain_examples():
    assert [str(s) for s in explain(parse(CHARGER_QUERY))] == [
        "latitude: backend-query(range)",
        "longitude: filter(range)",
        "name: filter(eq)",
        "type: filter(eq)",
    ]
    single = explain(parse("query { latitude { id } }"))
    assert [(s.field, s.kind) for s in single] == [("latitude", "backend-query")]
    reordered = explain(parse(chain_query(["name", "latitude", "longitude", "type"], Q_ARGS)))
    assert str(reordered[0]) == "name: backend-query(eq)"
    assert str(reordered[1]) == "latitude: filter(range)"
    assert all(s.kind == "filter" for s in reordered[1:])


def test_round_trip_reference():
    ast = parse(CHARGER_QUERY)
    assert parse(to_text(ast)) == ast


def test_schema_closed():
    from storebench.queryir import ApiSchema, FieldDef

    with pytest.raises(ValueError):
        ApiSchema({"a": FieldDef((), ("b",), ())}, {}, {})
    assert set(CHARGER_API.fields) == {"latitude", "longitude", "name", "type"}


# -- properties ---------------------------------------------------------------

_GEN = documents(GenSpec(n=2000, seed=31))
_COLL = Collection("gen")
_COLL.bulk_load(_GEN)


def _conds(args):
    from storebench.queryir import _routed_conditions

    ast = parse(chain_query(["latitude", "longitude", "name", "type"], args))
    return [c for cs in _routed_conditions(ast, CHARGER_API).values() for c in cs]


@pytest.mark.parametrize("order", list(itertools.permutations(["latitude", "longitude", "name", "type"])))
def test_nesting_order_invariance(order):
    base = execute(parse(chain_query(["latitude", "longitude", "name", "type"], Q_ARGS)), _COLL)
    other = execute(parse(chain_query(list(order), Q_ARGS)), _COLL)
    assert keys_of(other.documents) == keys_of(base.documents)
    assert keys_of(base.documents) == keys_of(filter_brute_force(_GEN, CANONICAL_QUERY))
    assert other.levels[0][0] == order[0]


args_st = st.fixed_dictionaries(
    {},
    optional={
        "latmin": st.sampled_from([43.19, 45.0, 47.5, 47.9]),
        "latmax": st.sampled_from([44.0, 47.9, 48.0]),
        "longmin": st.sampled_from([-124.9, -122.5, -121.0]),
        "longmax": st.sampled_from([-122.1, -120.1]),
        "name": st.sampled_from(["Howard", "Singh", "Nobody"]),
        "type": st.sampled_from(["level1", "level2"]),
    },
)


@settings(max_examples=60, deadline=None)
@given(args_st, st.permutations(["latitude", "longitude", "name", "type"]))
def test_execute_matches_oracle(args, order):
    result = execute(parse(chain_query(order, args)), _COLL)
    expected = filter_brute_force(_GEN, _conds(args))
    assert keys_of(result.documents) == keys_of(expected)
    counts = [c for _, c in result.levels]
    assert counts == sorted(counts, reverse=True)


names = st.from_regex(r"[a-z][a-z0-9_]{0,5}", fullmatch=True).filter(lambda s: s != "query")
literals = st.one_of(
    st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.from_regex(r"[A-Za-z0-9 _.-]{0,6}", fullmatch=True),
)


@st.composite
def field_nodes(draw, depth=0):
    node = FieldNode(draw(names), args=draw(st.dictionaries(names, literals, max_size=3)))
    if depth < 3 and draw(st.booleans()):
        node.children = draw(st.lists(field_nodes(depth=depth + 1), min_size=1, max_size=2))
    else:
        node.selections = draw(st.lists(names, min_size=1, max_size=3))
    return node


@settings(max_examples=150)
@given(field_nodes())
def test_print_parse_round_trip(root):
    ast = QueryAst(root)
    assert parse(to_text(ast)) == ast


def test_random_conditions_against_oracle():
    rnd = random.Random(5)
    for _ in range(30):
        args = {k: v for k, v in Q_ARGS.items() if rnd.random() < 0.5}
        order = rnd.sample(["latitude", "longitude", "name", "type"], 4)
        got = execute(parse(chain_query(order, args)), _COLL).documents
        assert keys_of(got) == keys_of(filter_brute_force(_GEN, _conds(args)))
