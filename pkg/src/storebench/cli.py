"""``storebench`` command line.

Exit codes: 0 success, 1 usage error, 2 domain error. Errors go to stderr
as one line ``error[<Tag>]: <message>``; data goes to stdout or ``--out``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import re
import sys
from dataclasses import dataclass
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import IO, Any, Iterator, Sequence

from . import analytics, bench, datagen, geohash, queryir
from .core import Condition, Document, Op, StoreError, filter_brute_force, read_jsonl
from .docstore import Collection
from .relstore import CHARGER_SCHEMA, Table

CONFIG_ENV = "STOREBENCH_CONFIG"


class UsageError(Exception):
    def __init__(self, message: str, help_text: str = ""):
        super().__init__(message)
        self.help_text = help_text


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2)
        raise UsageError(message, self.format_usage())


@dataclass
class Config:
    seed: int = 1
    sizes: tuple[int, ...] = bench.DEFAULT_SIZES
    prices: str | None = None
    output_dir: str = "."
    days_per_month: int = 30
    geohash_precision: int = 6

    @classmethod
    def load(cls, path: str | None = None) -> "Config":
        path = path or os.environ.get(CONFIG_ENV)
        if not path:
            return cls()
        data = json.loads(Path(path).read_text())
        cfg = cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})
        cfg.sizes = tuple(cfg.sizes)
        if any(n <= 0 for n in cfg.sizes):
            raise UsageError("config sizes must be positive")
        return cfg


# -- helpers ----------------------------------------------------------------


def fixture_path(name: str) -> Path:
    """Path of a bundled reference file (``firestore_latency.csv`` etc.)."""
    return Path(str(resources.files("storebench") / "data" / name))


def _resolve(path: str) -> Path:
    if path.startswith("builtin:"):
        return fixture_path(path[len("builtin:"):])
    return Path(path)


@contextlib.contextmanager
def _output(path: str | None, cfg: Config) -> Iterator[IO[str]]:
    if path is None or path == "-":
        yield sys.stdout
        return
    p = Path(path)
    if not p.is_absolute() and cfg.output_dir != ".":
        p = Path(cfg.output_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w", newline="") as fp:
        yield fp


_COND = re.compile(r"^\s*([A-Za-z_][\w]*)\s*(>=|<=|==|=|>|<)\s*(.*?)\s*$")
_OPS = {">=": Op.GE, "<=": Op.LE, "=": Op.EQ, "==": Op.EQ, ">": Op.GT, "<": Op.LT}


def _literal(text: str) -> Any:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_conditions(text: str) -> list[Condition]:
    """``"latitude>=47.5,name=Howard"`` -> conditions."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = _COND.match(part)
        if m is None:
            raise UsageError(f"cannot parse condition {part!r}")
        out.append(Condition(m.group(1), _OPS[m.group(2)], _literal(m.group(3))))
    return out


def _read_data(path: str) -> tuple[dict | None, list[Document]]:
    with open(_resolve(path)) as fp:
        first = fp.readline()
        if first.strip() and "columns" in json.loads(first):
            fp.seek(0)
            table = Table.load(fp)
            rows, _ = table.read_all()
            return None, [Document(f"{r[table.schema.primary_key]}", r) for r in rows]
        fp.seek(0)
        return read_jsonl(fp)


def _rows(docs: list[Document]) -> list[dict]:
    cols = set(CHARGER_SCHEMA.names())
    return [{k: v for k, v in d.fields.items() if k in cols} for d in docs]


def _dump_docs(docs: Sequence[Document], fp: IO[str]) -> None:
    payload = []
    for d in docs:
        obj = {"_key": d.key}
        obj.update(d.fields)
        payload.append(obj)
    json.dump(payload, fp, indent=1)
    fp.write("\n")


def _decimal_default(o: Any) -> Any:
    if isinstance(o, Decimal):
        return str(o)
    raise TypeError(type(o).__name__)


# -- commands ---------------------------------------------------------------


def cmd_gen(args, cfg: Config) -> int:
    spec = datagen.GenSpec(n=args.n, seed=cfg.seed if args.seed is None else args.seed, continuous=args.continuous)
    with _output(args.out, cfg) as fp:
        datagen.write_dataset(spec, fp, geohash_precision=args.geohash_precision)
    return 0


def cmd_load(args, cfg: Config) -> int:
    _, docs = _read_data(args.data)
    with _output(args.out, cfg) as fp:
        if args.engine == "docstore":
            coll = Collection(args.name)
            coll.bulk_load(docs)
            coll.dump(fp)
        else:
            table = Table(args.name, CHARGER_SCHEMA)
            keys = {d.fields.get("id"): d.key for d in docs}
            table.bulk_load(_rows(docs))
            table.dump(fp, key_of=lambda row: keys[row["id"]])
    return 0


def cmd_query(args, cfg: Config) -> int:
    if args.engine == "queryir":
        if not (args.text or args.query_file):
            raise UsageError("queryir needs --text or --query-file")
    elif args.cond is None:
        raise UsageError(f"{args.engine} needs --cond")
    _, docs = _read_data(args.data)
    if args.engine == "queryir":
        text = Path(args.query_file).read_text() if args.query_file else args.text
        ast = queryir.parse(text)
        coll = Collection("data")
        coll.bulk_load(docs)
        result = queryir.execute(ast, coll)
        with _output(args.out, cfg) as fp:
            _dump_docs(result.documents, fp)
        if args.levels_out:
            Path(args.levels_out).write_text(json.dumps(result.sidecar(), indent=1) + "\n")
        return 0
    conds = parse_conditions(args.cond)
    if args.engine == "docstore":
        coll = Collection("data")
        coll.bulk_load(docs)
        found, _ = coll.query(conds)
        if args.client_cond:
            found = filter_brute_force(found, parse_conditions(args.client_cond))
    else:
        table = Table("data", CHARGER_SCHEMA)
        keys = {d.fields.get("id"): d.key for d in docs}
        table.bulk_load(_rows(docs))
        rows, _ = table.select(conds)
        found = [Document(keys[r["id"]], r) for r in rows]
    with _output(args.out, cfg) as fp:
        _dump_docs(found, fp)
    return 0


def cmd_bench_run(args, cfg: Config) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(",")) if args.sizes else cfg.sizes
    spec = bench.WorkloadSpec(
        workload=args.workload,
        engine=args.engine,
        sizes=sizes if not args.data else (1,),
        seed=cfg.seed if args.seed is None else args.seed,
        repetitions=args.repetitions,
        allow_large=args.allow_large,
    )
    data = _read_data(args.data)[1] if args.data else None
    samples = bench.run(spec, data=data)
    with _output(args.out, cfg) as fp:
        bench.export(samples, fp, args.format)
    if args.metrics_out:
        with _output(args.metrics_out, cfg) as fp:
            bench.export(bench.metrics(samples, args.avg_doc_bytes), fp, "csv")
    return 0


def cmd_bench_metrics(args, cfg: Config) -> int:
    with open(args.csv) as fp:
        samples = bench.import_samples(fp, "csv")
    with _output(args.out, cfg) as fp:
        bench.export(bench.metrics(samples, args.avg_doc_bytes), fp, args.format)
    return 0


def cmd_fit(args, cfg: Config) -> int:
    names = [p.strip() for p in args.predictors.split(",") if p.strip()]
    fit = analytics.fit_csv(_resolve(args.csv), names)
    with _output(args.out, cfg) as fp:
        json.dump(fit.to_dict(), fp, indent=1)
        fp.write("\n")
    return 0


def _prices(args, cfg: Config) -> analytics.PriceSheet:
    path = args.prices or cfg.prices
    prices = analytics.load_prices(_resolve(path) if path else None)
    days = args.days_per_month or cfg.days_per_month
    if days != prices.days_per_month:
        prices = analytics.PriceSheet.from_dict({**prices.to_dict(), "days_per_month": days})
    return prices


def cmd_cost(args, cfg: Config) -> int:
    usage = analytics.load_usage(_resolve(args.usage))
    prices = _prices(args, cfg)
    reports = []
    if args.model in ("per_use", "both"):
        reports.append(analytics.per_use_cost(usage, prices).to_dict())
    if args.model in ("per_resource", "both"):
        reports.append(analytics.per_resource_cost(usage, prices).to_dict())
    with _output(args.out, cfg) as fp:
        json.dump(reports if len(reports) > 1 else reports[0], fp, indent=1)
        fp.write("\n")
    return 0


def cmd_crossover(args, cfg: Config) -> int:
    usage = analytics.load_usage(_resolve(args.usage))
    result = analytics.crossover(_prices(args, cfg), usage, args.step, args.points)
    with _output(args.out, cfg) as fp:
        result.to_csv(fp)
    if result.crossover_ops_per_day is None:
        print("no crossover in the swept range", file=sys.stderr)
    else:
        print(f"crossover at {result.crossover_ops_per_day} ops/day", file=sys.stderr)
    return 0


def cmd_geohash(args, cfg: Config) -> int:
    precision = getattr(args, "precision", None) or cfg.geohash_precision
    if args.action == "encode":
        print(geohash.encode(args.lat, args.lon, precision))
    elif args.action == "decode":
        box = geohash.decode(args.hash)
        print(f"{box.lat_min} {box.lat_max} {box.long_min} {box.long_max}")
    else:
        try:
            lat_min, lat_max, lon_min, lon_max = (float(x) for x in args.box.split(","))
        except ValueError:
            raise UsageError("--box wants lat_min,lat_max,long_min,long_max") from None
        for prefix in geohash.cover(geohash.GeoBox(lat_min, lat_max, lon_min, lon_max), precision, args.limit):
            print(prefix)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="storebench", description="Document vs relational storage workbench.")
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a mock charger dataset as JSON lines")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--out")
    g.add_argument("--geohash-precision", type=int)
    g.add_argument("--continuous", action="store_true", help="uniform coordinates instead of five levels")
    g.set_defaults(func=cmd_gen)

    ld = sub.add_parser("load", help="load a dataset into an engine and write its snapshot")
    ld.add_argument("--data", required=True)
    ld.add_argument("--engine", choices=("docstore", "relstore"), default="docstore")
    ld.add_argument("--name", default="chargers")
    ld.add_argument("--out")
    ld.set_defaults(func=cmd_load)

    q = sub.add_parser("query", help="run one query and print matching documents as JSON")
    q.add_argument("--engine", choices=("docstore", "relstore", "queryir"), required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--cond", help='e.g. "latitude>=47.5,latitude<=48.0,name=Howard"')
    q.add_argument("--client-cond", help="docstore only: conditions applied client-side after the query")
    q.add_argument("--text", help="queryir query text")
    q.add_argument("--query-file")
    q.add_argument("--levels-out", help="queryir: write per-level counts JSON here")
    q.add_argument("--out")
    q.set_defaults(func=cmd_query)

    b = sub.add_parser("bench", help="run workloads or summarise results")
    bsub = b.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)
    br = bsub.add_parser("run")
    br.add_argument("--workload", choices=bench.WORKLOADS, required=True)
    br.add_argument("--engine", choices=bench.ENGINES, required=True)
    br.add_argument("--sizes", help="comma-separated collection sizes")
    br.add_argument("--seed", type=int)
    br.add_argument("--repetitions", type=int, default=1)
    br.add_argument("--data", help="use this dataset instead of generating one per size")
    br.add_argument("--allow-large", action="store_true")
    br.add_argument("--format", choices=("csv", "json"), default="csv")
    br.add_argument("--avg-doc-bytes", type=float, default=bench.AVG_DOC_BYTES)
    br.add_argument("--metrics-out")
    br.add_argument("--out")
    br.set_defaults(func=cmd_bench_run)
    bm = bsub.add_parser("metrics")
    bm.add_argument("--csv", required=True)
    bm.add_argument("--avg-doc-bytes", type=float, default=bench.AVG_DOC_BYTES)
    bm.add_argument("--format", choices=("csv", "json"), default="csv")
    bm.add_argument("--out")
    bm.set_defaults(func=cmd_bench_metrics)

    f = sub.add_parser("fit", help="least-squares latency model from a CSV")
    f.add_argument("--csv", required=True, help="path, or builtin:<name> for a bundled table")
    f.add_argument("--predictors", default="n", help="comma-separated, e.g. n,r")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("cost", help="itemised monthly cost report")
    c.add_argument("--usage", default="builtin:reference_usage.json")
    c.add_argument("--prices")
    c.add_argument("--model", choices=("per_use", "per_resource", "both"), default="both")
    c.add_argument("--days-per-month", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_cost)

    x = sub.add_parser("crossover", help="per-use vs per-resource cost sweep as CSV")
    x.add_argument("--usage", default="builtin:reference_usage.json")
    x.add_argument("--prices")
    x.add_argument("--step", type=int, default=100_000)
    x.add_argument("--points", type=int, default=20)
    x.add_argument("--days-per-month", type=int)
    x.add_argument("--out")
    x.set_defaults(func=cmd_crossover)

    gh = sub.add_parser("geohash", help="geohash utilities")
    ghs = gh.add_subparsers(dest="action", required=True, parser_class=_Parser)
    e = ghs.add_parser("encode")
    e.add_argument("lat", type=float)
    e.add_argument("lon", type=float)
    e.add_argument("--precision", type=int)
    d = ghs.add_parser("decode")
    d.add_argument("hash")
    cv = ghs.add_parser("cover")
    cv.add_argument("--box", required=True, help="lat_min,lat_max,long_min,long_max")
    cv.add_argument("--precision", type=int)
    cv.add_argument("--limit", type=int, default=geohash.DEFAULT_COVER_LIMIT)
    for sp in (e, d, cv):
        sp.set_defaults(func=cmd_geohash)
    return p


def dispatch(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = Config.load(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error[UsageError]: {exc}", file=sys.stderr)
        if exc.help_text:
            sys.stderr.write(exc.help_text)
        return 1
    except StoreError as exc:
        print(f"error[{exc.tag}]: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        tag = type(exc).__name__
        msg = str(exc).replace("\n", " ")
        print(f"error[{tag}]: {msg}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
