"""Latency regression and cloud cost models.

``ols_fit`` solves least squares through a QR factorisation of the design
matrix (the normal equations, solved stably) and reports coefficient
standard errors ``sqrt(s2 * inv(X'X)_jj)`` with ``s2 = RSS / (m - p)``.

The cost side has two billing shapes: per-use (operations and storage
above a free tier) and per-resource (provisioned compute and storage,
independent of traffic). Money is kept in :class:`decimal.Decimal`.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .core import StoreError


class RankDeficient(StoreError):
    tag = "RankDeficient"


class TooFewSamples(StoreError):
    tag = "TooFewSamples"


class ArityMismatch(StoreError):
    tag = "ArityMismatch"


@dataclass(frozen=True)
class RegressionFit:
    predictors: tuple[str, ...]
    intercept: float
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    intercept_se: float
    r_squared: float
    rss: float
    m: int
    p: int

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.predictors.index(name)]

    def std_error(self, name: str) -> float:
        return self.std_errors[self.predictors.index(name)]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"predictors": list(self.predictors), "beta0": self.intercept}
        for i, name in enumerate(self.predictors, start=1):
            out[f"beta{i}"] = self.coefficients[i - 1]
            out[f"se_beta{i}"] = self.std_errors[i - 1]
        out.update(se_beta0=self.intercept_se, r_squared=self.r_squared, rss=self.rss, m=self.m, p=self.p)
        return out


def ols_fit(
    latencies: Sequence[float],
    predictors: Mapping[str, Sequence[float]] | Sequence[Sequence[float]],
) -> RegressionFit:
    """Fit ``l = b0 + sum_j bj * xj`` by ordinary least squares.

    ``predictors`` is either a mapping name -> column or a list of columns
    (named x1, x2, ...). Needs more samples than parameters and a design
    matrix of full column rank.
    """
    if isinstance(predictors, Mapping):
        names = tuple(predictors)
        cols = [predictors[k] for k in names]
    else:
        cols = list(predictors)
        names = tuple(f"x{i}" for i in range(1, len(cols) + 1))
    y = np.asarray(latencies, dtype=float)
    m = y.shape[0]
    p = len(cols) + 1
    if m <= p:
        raise TooFewSamples(f"need more than {p} samples, got {m}")
    arrays = [np.asarray(c, dtype=float) for c in cols]
    if any(a.shape != (m,) for a in arrays):
        raise ArityMismatch("every predictor column needs one value per sample")
    X = np.column_stack([np.ones(m)] + arrays)

    # Column scaling keeps R well conditioned when n spans 10..1e6.
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise RankDeficient("a predictor column is identically zero")
    Xs = X / scale
    Q, R = np.linalg.qr(Xs)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise RankDeficient("design matrix is rank deficient")
    beta = np.linalg.solve(R, Q.T @ y) / scale
    resid = y - X @ beta
    rss = float(resid @ resid)
    R_inv = np.linalg.inv(R)
    xtx_inv_diag = np.sum(R_inv**2, axis=1) / scale**2
    s2 = rss / (m - p)
    se = np.sqrt(s2 * xtx_inv_diag)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionFit(
        predictors=names,
        intercept=float(beta[0]),
        coefficients=tuple(float(b) for b in beta[1:]),
        std_errors=tuple(float(s) for s in se[1:]),
        intercept_se=float(se[0]),
        r_squared=r2,
        rss=rss,
        m=m,
        p=p,
    )


def predict(fit: RegressionFit, predictors: Sequence[float] | Mapping[str, float]) -> float:
    if isinstance(predictors, Mapping):
        missing = [n for n in fit.predictors if n not in predictors]
        if missing or len(predictors) != len(fit.predictors):
            raise ArityMismatch(f"expected predictors {list(fit.predictors)}, got {list(predictors)}")
        values = [predictors[n] for n in fit.predictors]
    else:
        values = list(predictors)
        if len(values) != len(fit.coefficients):
            raise ArityMismatch(f"expected {len(fit.coefficients)} predictor values, got {len(values)}")
    return fit.intercept + sum(b * x for b, x in zip(fit.coefficients, values))


_ALIASES = {"r'": "r_prime", "rprime": "r_prime", "l": "l", "latency": "l", "elapsed_ms": "l"}


def read_samples_csv(path: str | Path) -> dict[str, list[float]]:
    """Columns of a latency CSV as floats, keyed by normalised name.

    The latency column may be called ``l``, ``latency`` or ``elapsed_ms``;
    ``r'`` is read as ``r_prime``. Non-numeric columns are dropped.
    """
    with open(path, newline="") as fp:
        rows = list(csv.DictReader(fp))
    if not rows:
        raise TooFewSamples(f"{path}: no data rows")
    out: dict[str, list[float]] = {}
    for name in rows[0]:
        key = _ALIASES.get(name.strip(), name.strip())
        try:
            out[key] = [float(row[name]) for row in rows]
        except (TypeError, ValueError):
            continue
    if "l" not in out:
        raise ArityMismatch(f"{path}: no latency column (l, latency or elapsed_ms)")
    return out


def fit_csv(path: str | Path, predictor_names: Sequence[str]) -> RegressionFit:
    data = read_samples_csv(path)
    names = [_ALIASES.get(n, n) for n in predictor_names]
    missing = [n for n in names if n not in data]
    if missing:
        raise ArityMismatch(f"{path}: missing predictor column(s) {missing}")
    return ols_fit(data["l"], {n: data[n] for n in names})


# -- cost models -----------------------------------------------------------

MILL = Decimal("0.001")
CENT = Decimal("0.01")


def _d(x: Any) -> Decimal:
    return x if isinstance(x, Decimal) else Decimal(str(x))


def _round(x: Decimal, quantum: Decimal) -> Decimal:
    return x.quantize(quantum, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class PriceSheet:
    # per-use
    writes_free_per_day: int = 20_000
    writes_price_per_100k: Decimal = Decimal("0.09")
    reads_free_per_day: int = 50_000
    reads_price_per_100k: Decimal = Decimal("0.03")
    storage_free_gb: Decimal = Decimal("1")
    storage_price_gb_month: Decimal = Decimal("0.15")
    egress_free_gb: Decimal = Decimal("10")
    egress_price_gb: Decimal = Decimal("0.12")
    # per-resource
    vcpu_price_month: Decimal = Decimal("30.149")
    memory_price_gb_month: Decimal = Decimal("5.11")
    storage_price_gb_month_provisioned: Decimal = Decimal("0.17")
    egress_price_gb_provisioned: Decimal = Decimal("0.19")
    days_per_month: int = 30

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name.endswith(("per_day", "days_per_month")):
                object.__setattr__(self, f.name, int(value))
            else:
                object.__setattr__(self, f.name, _d(value))
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if not 28 <= self.days_per_month <= 31:
            raise ValueError("days_per_month must be in [28, 31]")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PriceSheet":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown price sheet keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {k: (str(v) if isinstance(v, Decimal) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class UsageProfile:
    """What a deployment does in a month.

    ``active_days`` is how many days of the month see the daily read and
    write volume; free tiers apply per day.
    """

    writes_per_day: int = 0
    reads_per_day: int = 0
    active_days: int = 1
    stored_gb: Decimal = Decimal("0")
    egress_gb_month: Decimal = Decimal("0")
    months: int = 1
    vcpus: Decimal = Decimal("0")
    memory_gb: Decimal = Decimal("0")
    storage_gb: Decimal = Decimal("0")

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in ("int",):
                object.__setattr__(self, f.name, int(value))
            else:
                object.__setattr__(self, f.name, _d(value))
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "UsageProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown usage keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class CostLine:
    item: str
    billed: Decimal
    amount: Decimal


@dataclass(frozen=True)
class CostReport:
    model: str
    lines: tuple[CostLine, ...]
    total: Decimal

    def line(self, item: str) -> Decimal:
        for ln in self.lines:
            if ln.item == item:
                return ln.amount
        raise KeyError(item)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "lines": [{"item": ln.item, "billed": str(ln.billed), "amount": str(ln.amount)} for ln in self.lines],
            "total": str(self.total),
        }


def per_use_cost(usage: UsageProfile, prices: PriceSheet = PriceSheet()) -> CostReport:
    """Operation-and-storage billing above daily/monthly free quotas.

    Line items and total are kept to a tenth of a cent.
    """
    months = usage.months
    writes = max(0, usage.writes_per_day - prices.writes_free_per_day) * usage.active_days * months
    reads = max(0, usage.reads_per_day - prices.reads_free_per_day) * usage.active_days * months
    storage = max(Decimal(0), usage.stored_gb - prices.storage_free_gb)
    egress = max(Decimal(0), usage.egress_gb_month - prices.egress_free_gb)
    raw = [
        ("writes", Decimal(writes), Decimal(writes) * prices.writes_price_per_100k / 100_000),
        ("reads", Decimal(reads), Decimal(reads) * prices.reads_price_per_100k / 100_000),
        ("storage", storage, storage * prices.storage_price_gb_month * months),
        ("ingress", Decimal(0), Decimal(0)),
        ("egress", egress, egress * prices.egress_price_gb * months),
    ]
    lines = tuple(CostLine(item, billed, _round(amount, MILL)) for item, billed, amount in raw)
    return CostReport("per_use", lines, _round(sum(ln.amount for ln in lines), MILL))


def per_resource_cost(usage: UsageProfile, prices: PriceSheet = PriceSheet()) -> CostReport:
    """Provisioned-capacity billing; reads and writes do not matter.

    Line items are rounded to cents, then summed.
    """
    months = usage.months
    raw = [
        ("vcpu", usage.vcpus, usage.vcpus * prices.vcpu_price_month * months),
        ("memory", usage.memory_gb, usage.memory_gb * prices.memory_price_gb_month * months),
        ("storage", usage.storage_gb, usage.storage_gb * prices.storage_price_gb_month_provisioned * months),
        ("ingress", Decimal(0), Decimal(0)),
        ("egress", usage.egress_gb_month, usage.egress_gb_month * prices.egress_price_gb_provisioned * months),
    ]
    lines = tuple(CostLine(item, billed, _round(amount, CENT)) for item, billed, amount in raw)
    return CostReport("per_resource", lines, _round(sum(ln.amount for ln in lines), CENT))


@dataclass(frozen=True)
class CrossoverResult:
    curve: tuple[tuple[int, Decimal, Decimal], ...]
    crossover_ops_per_day: int | None

    def to_csv(self, fp) -> None:
        w = csv.writer(fp)
        w.writerow(["ops_per_day", "per_use", "per_resource"])
        for ops, use, res in self.curve:
            w.writerow([ops, use, res])


def crossover(
    prices: PriceSheet,
    usage: UsageProfile,
    step: int,
    points: int = 20,
) -> CrossoverResult:
    """Sweep reads/day = writes/day = k * step for k = 0..points.

    Every day of the month is active. Storage and egress come from
    ``usage``; the per-resource total is the same at every point.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    fixed = per_resource_cost(usage, prices).total
    curve = []
    first = None
    for k in range(points + 1):
        ops = k * step
        month = UsageProfile(
            writes_per_day=ops,
            reads_per_day=ops,
            active_days=prices.days_per_month,
            stored_gb=usage.stored_gb,
            egress_gb_month=usage.egress_gb_month,
            months=1,
        )
        use = per_use_cost(month, prices).total
        curve.append((ops, use, fixed))
        if first is None and use >= fixed:
            first = ops
    return CrossoverResult(tuple(curve), first)


# Worst case from the benchmark month: 10^6 documents written and read in one
# day, 1.9 GB stored (data plus index overhead), 76 MB egress, and a
# 1 vCPU / 0.614 GB / 10 GB instance for the provisioned side.
REFERENCE_USAGE = UsageProfile(
    writes_per_day=1_000_000,
    reads_per_day=1_000_000,
    active_days=1,
    stored_gb=Decimal("1.9"),
    egress_gb_month=Decimal("0.076"),
    months=1,
    vcpus=Decimal("1"),
    memory_gb=Decimal("0.614"),
    storage_gb=Decimal("10"),
)


def load_prices(path: str | Path | None) -> PriceSheet:
    if path is None:
        return PriceSheet()
    return PriceSheet.from_dict(json.loads(Path(path).read_text()))


def load_usage(path: str | Path) -> UsageProfile:
    return UsageProfile.from_dict(json.loads(Path(path).read_text()))
