"""A small GraphQL-style query layer over the document store.

Query text is parsed into a tree of :class:`FieldNode`, validated against an
:class:`ApiSchema`, and executed as a resolver chain: the root field's
resolver issues one backend query, and each nested field's resolver only
filters the documents handed down by its parent.

Grammar::

    document := "query" "{" field "}"
    field    := NAME [ "(" arg { "," arg } [","] ")" ] "{" ( field+ | NAME+ ) "}"
    arg      := NAME ":" literal
    literal  := NUMBER | 'quoted' | "quoted" | NAME
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

from .core import Condition, Document, Op, QuerySpec, ScanStats, StoreError, condition_matches

log = logging.getLogger(__name__)


class QuerySyntaxError(StoreError, ValueError):
    tag = "SyntaxError"

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class UnvalidatedAst(StoreError):
    tag = "UnvalidatedAst"

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class BackendError(StoreError):
    tag = "BackendError"


# -- AST ----------------------------------------------------------------


@dataclass
class FieldNode:
    name: str
    args: dict[str, Any] = field(default_factory=dict)
    children: list["FieldNode"] = field(default_factory=list)
    selections: list[str] = field(default_factory=list)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def walk(self) -> Iterator["FieldNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class QueryAst:
    root: FieldNode

    def chain(self) -> list[FieldNode]:
        """Root-to-leaf path, following the first child at each level."""
        out = [self.root]
        while out[-1].children:
            out.append(out[-1].children[0])
        return out


# -- lexer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:[^'\\\n]|\\.)*'|"(?:[^"\\\n]|\\.)*")
  | (?P<punct>[{}():,])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", r"\1", body)


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        newlines = m.group().count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + m.group().rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- parser ---------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def fail(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise QuerySyntaxError(f"expected {expected}, found {found}", t.line, t.column)

    def expect(self, text: str) -> _Token:
        if self.tok.text != text or self.tok.kind not in ("punct", "name"):
            self.fail(repr(text))
        t = self.tok
        self.i += 1
        return t

    def name(self) -> _Token:
        if self.tok.kind != "name":
            self.fail("a name")
        t = self.tok
        self.i += 1
        return t

    def document(self) -> QueryAst:
        self.expect("query")
        self.expect("{")
        root = self.field()
        self.expect("}")
        if self.tok.kind != "eof":
            self.fail("end of input")
        return QueryAst(root)

    def field(self) -> FieldNode:
        t = self.name()
        node = FieldNode(t.text, line=t.line, column=t.column)
        if self.tok.text == "(":
            node.args = self.args()
        self.expect("{")
        while self.tok.text != "}":
            if self.tok.kind != "name":
                self.fail("a field or selection name")
            nxt = self.tokens[self.i + 1].text
            if nxt in ("(", "{"):
                if node.selections:
                    self.fail("a selection (cannot mix fields and selections)")
                node.children.append(self.field())
            else:
                if node.children:
                    self.fail("a field (cannot mix fields and selections)")
                node.selections.append(self.name().text)
        if not node.children and not node.selections:
            self.fail("at least one field or selection")
        self.expect("}")
        return node

    def args(self) -> dict[str, Any]:
        self.expect("(")
        args: dict[str, Any] = {}
        while True:
            t = self.name()
            if t.text in args:
                raise QuerySyntaxError(f"duplicate argument {t.text!r}", t.line, t.column)
            self.expect(":")
            args[t.text] = self.literal()
            if self.tok.text == ",":
                self.i += 1
            if self.tok.text == ")":
                self.i += 1
                return args

    def literal(self) -> Any:
        t = self.tok
        if t.kind == "number":
            self.i += 1
            if re.fullmatch(r"-?\d+", t.text):
                return int(t.text)
            return float(t.text)
        if t.kind == "string":
            self.i += 1
            return _unescape(t.text[1:-1])
        if t.kind == "name":
            self.i += 1
            return t.text
        self.fail("a literal")


def parse(text: str) -> QueryAst:
    return _Parser(text).document()


def _literal_text(value: Any) -> str:
    if isinstance(value, str):
        return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"
    return repr(value)


def to_text(ast: QueryAst, indent: str = "  ") -> str:
    """Render an AST back to query text that parses to an equal AST."""
    lines = ["query {"]

    def emit(node: FieldNode, depth: int) -> None:
        pad = indent * depth
        head = node.name
        if node.args:
            head += "(" + ", ".join(f"{k}: {_literal_text(v)}" for k, v in node.args.items()) + ")"
        lines.append(f"{pad}{head} {{")
        for child in node.children:
            emit(child, depth + 1)
        for sel in node.selections:
            lines.append(f"{pad}{indent}{sel}")
        lines.append(f"{pad}}}")

    emit(ast.root, 1)
    lines.append("}")
    return "\n".join(lines)


# -- schema & validation ---------------------------------------------------


@dataclass(frozen=True)
class FieldDef:
    args: tuple[str, ...]
    children: tuple[str, ...]
    selections: tuple[str, ...]


@dataclass(frozen=True)
class ApiSchema:
    """Resolvable fields, their argument vocabulary, and where arguments go.

    ``arg_types`` maps an argument to ``"number"``, ``"integer"`` or ``"text"``.
    ``arg_routes`` maps an argument to the ``(document field, operator)`` it
    constrains; arguments without a route are hints only.
    """

    fields: Mapping[str, FieldDef]
    arg_types: Mapping[str, str]
    arg_routes: Mapping[str, tuple[str, Op]]

    def __post_init__(self) -> None:
        for name, fdef in self.fields.items():
            for child in fdef.children:
                if child not in self.fields:
                    raise ValueError(f"field {name!r} names undeclared child {child!r}")
            for arg in fdef.args:
                if arg not in self.arg_types:
                    raise ValueError(f"argument {arg!r} has no declared type")


_CHAIN_FIELDS = ("latitude", "longitude", "name", "type")
_LEAVES = ("id", "name", "address", "latitude", "longitude", "type")
_ARG_TYPES = {
    "num": "integer",
    "latmin": "number",
    "latmax": "number",
    "longmin": "number",
    "longmax": "number",
    "name": "text",
    "type": "text",
}

CHARGER_API = ApiSchema(
    fields={
        f: FieldDef(
            args=tuple(_ARG_TYPES),
            children=tuple(c for c in _CHAIN_FIELDS if c != f),
            selections=_LEAVES,
        )
        for f in _CHAIN_FIELDS
    },
    arg_types=_ARG_TYPES,
    arg_routes={
        "latmin": ("latitude", Op.GE),
        "latmax": ("latitude", Op.LE),
        "longmin": ("longitude", Op.GE),
        "longmax": ("longitude", Op.LE),
        "name": ("name", Op.EQ),
        "type": ("type", Op.EQ),
    },
)


@dataclass(frozen=True)
class Violation:
    kind: str
    path: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind} {self.path}" + (f" ({self.detail})" if self.detail else "")


def _type_matches(expected: str, value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if expected == "text":
        return isinstance(value, str)
    if expected == "integer":
        return isinstance(value, int)
    return isinstance(value, (int, float))


def validate(ast: QueryAst, schema: ApiSchema = CHARGER_API) -> list[Violation]:
    """All schema violations in the query; an empty list means valid."""
    out: list[Violation] = []
    arg_owner: dict[str, str] = {}

    def visit(node: FieldNode, parent: FieldDef | None, path: str, seen: tuple[str, ...]) -> None:
        here = f"{path}.{node.name}" if path else node.name
        fdef = schema.fields.get(node.name)
        if fdef is None or (parent is not None and node.name not in parent.children):
            out.append(Violation("UnknownField", here))
        if node.name in seen:
            out.append(Violation("RepeatedField", here))
        if len(node.children) > 1:
            out.append(Violation("SiblingFields", here, ", ".join(c.name for c in node.children)))
        for arg, value in node.args.items():
            where = f"{node.name}.{arg}"
            if fdef is None:
                continue
            if arg not in fdef.args:
                out.append(Violation("UnknownArg", where))
                continue
            if not _type_matches(schema.arg_types[arg], value):
                out.append(Violation("ArgTypeMismatch", where, f"expected {schema.arg_types[arg]}"))
            if arg in arg_owner:
                out.append(Violation("DuplicateArg", where, f"also given on {arg_owner[arg]}"))
            else:
                arg_owner[arg] = node.name
        if fdef is not None:
            for sel in node.selections:
                if sel not in fdef.selections:
                    out.append(Violation("UnknownSelection", f"{here}.{sel}"))
        for child in node.children:
            visit(child, fdef, here, seen + (node.name,))

    visit(ast.root, None, "", ())
    chain_names = {n.name for n in ast.root.walk()}
    for arg, owner in arg_owner.items():
        route = schema.arg_routes.get(arg)
        if route is not None and route[0] not in chain_names:
            out.append(Violation("UnresolvedArg", f"{owner}.{arg}", f"no {route[0]!r} field in the query"))
    return out


# -- execution ------------------------------------------------------------


@dataclass(frozen=True)
class ResolverStep:
    level: int
    field: str
    kind: str  # "backend-query" | "filter"
    conditions: tuple[Condition, ...]

    @property
    def shape(self) -> str:
        if not self.conditions:
            return "all"
        if any(c.op.is_inequality for c in self.conditions):
            return "range"
        return "eq"

    def __str__(self) -> str:
        return f"{self.field}: {self.kind}({self.shape})"


@dataclass
class ExecutionResult:
    documents: list[Document]
    levels: list[tuple[str, int]]
    stats: ScanStats
    warnings: list[str] = field(default_factory=list)

    @property
    def r(self) -> int:
        return self.levels[0][1]

    @property
    def r_prime(self) -> int:
        return self.levels[-1][1]

    def sidecar(self) -> dict:
        return {"levels": [{"field": f, "count": c} for f, c in self.levels]}


def _routed_conditions(ast: QueryAst, schema: ApiSchema) -> dict[str, list[Condition]]:
    by_field: dict[str, list[Condition]] = {}
    for node in ast.root.walk():
        for arg, value in node.args.items():
            route = schema.arg_routes.get(arg)
            if route is not None:
                target, op = route
                by_field.setdefault(target, []).append(Condition(target, op, value))
    return by_field


def explain(ast: QueryAst, schema: ApiSchema = CHARGER_API) -> list[ResolverStep]:
    conds = _routed_conditions(ast, schema)
    return [
        ResolverStep(level, node.name, "backend-query" if level == 0 else "filter", tuple(conds.get(node.name, ())))
        for level, node in enumerate(ast.chain())
    ]


def execute(ast: QueryAst, backend, schema: ApiSchema = CHARGER_API) -> ExecutionResult:
    """Run the resolver chain against a document collection.

    Raises :class:`UnvalidatedAst` if the query does not validate.
    """
    violations = validate(ast, schema)
    if violations:
        raise UnvalidatedAst(violations)
    steps = explain(ast, schema)
    warnings = []
    hint = next((n.args["num"] for n in ast.root.walk() if "num" in n.args), None)
    if hint is not None and hint != len(backend):
        warnings.append(f"num={hint} but the collection holds {len(backend)} documents")
        log.debug(warnings[-1])
    try:
        current, stats = backend.query(QuerySpec(steps[0].conditions))
    except StoreError as exc:
        raise BackendError(f"{type(exc).__name__}: {exc}") from exc
    levels = [(steps[0].field, len(current))]
    for step in steps[1:]:
        if step.conditions:
            current = [d for d in current if all(condition_matches(d, c) for c in step.conditions)]
        levels.append((step.field, len(current)))
    leaf = ast.chain()[-1]
    docs = [d.project(leaf.selections) for d in current]
    return ExecutionResult(docs, levels, stats, warnings)


CHARGER_QUERY = """\
query {
    latitude(
        num: 1000000,
        latmin: 47.5,
        latmax: 48.0,
        longmin: -122.5,
        longmax: -122.1,
        name: 'Howard',
        type: 'level2')
    {
        longitude {
            name {
                type {
                    id
                    name
                    address
                    latitude
                    longitude
                    type
                }
            }
        }
    }
}
"""
