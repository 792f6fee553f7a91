"""Base-32 geohash encoding, bounding-box covers and range-query rewriting.

Bits alternate longitude, latitude (longitude first), five bits per
character. Equal-length hashes sort lexicographically in Z-order, so the
set of cells under a bounding box splits into a few contiguous key runs,
each of which is one single-field range query.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .core import Condition, Document, Op, QuerySpec, ScanStats, StoreError, filter_brute_force

ALPHABET = "0123456789bcdefghjkmnpqrstuvwxyz"
_DECODE = {c: i for i, c in enumerate(ALPHABET)}
MAX_PRECISION = 12
DEFAULT_COVER_LIMIT = 1024
FIELD = "geohash"


class OutOfBounds(StoreError, ValueError):
    tag = "OutOfBounds"


class BadPrecision(StoreError, ValueError):
    tag = "BadPrecision"


class BadCharacter(StoreError, ValueError):
    tag = "BadCharacter"


class PrecisionTooFine(StoreError):
    tag = "PrecisionTooFine"


@dataclass(frozen=True)
class GeoBox:
    lat_min: float
    lat_max: float
    long_min: float
    long_max: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat_min <= self.lat_max <= 90.0):
            raise OutOfBounds(f"bad latitude span [{self.lat_min}, {self.lat_max}]")
        if not (-180.0 <= self.long_min <= self.long_max <= 180.0):
            raise OutOfBounds(f"bad longitude span [{self.long_min}, {self.long_max}]")

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.long_min <= lon <= self.long_max

    def contains_box(self, other: "GeoBox") -> bool:
        return (
            self.lat_min <= other.lat_min
            and other.lat_max <= self.lat_max
            and self.long_min <= other.long_min
            and other.long_max <= self.long_max
        )

    def intersects(self, other: "GeoBox") -> bool:
        return not (
            other.lat_max < self.lat_min
            or other.lat_min > self.lat_max
            or other.long_max < self.long_min
            or other.long_min > self.long_max
        )

    def conditions(self) -> list[Condition]:
        return [
            Condition("latitude", Op.GE, self.lat_min),
            Condition("latitude", Op.LE, self.lat_max),
            Condition("longitude", Op.GE, self.long_min),
            Condition("longitude", Op.LE, self.long_max),
        ]


WORLD = GeoBox(-90.0, 90.0, -180.0, 180.0)


def _check_precision(precision: int) -> None:
    if isinstance(precision, bool) or not isinstance(precision, int) or not 1 <= precision <= MAX_PRECISION:
        raise BadPrecision(f"precision must be an integer in 1..{MAX_PRECISION}, got {precision!r}")


def _axis_bits(x: float, lo: float, hi: float, nbits: int) -> int:
    """Cell index of ``x`` after ``nbits`` halvings; a point on a midpoint goes up."""
    out = 0
    for _ in range(nbits):
        mid = (lo + hi) / 2
        if x >= mid:
            out = (out << 1) | 1
            lo = mid
        else:
            out <<= 1
            hi = mid
    return out


def _bit_split(precision: int) -> tuple[int, int]:
    total = 5 * precision
    lon_bits = (total + 1) // 2
    return lon_bits, total - lon_bits


def _interleave(lon_idx: int, lat_idx: int, precision: int) -> str:
    lon_bits, lat_bits = _bit_split(precision)
    value = 0
    for i in range(5 * precision):
        if i % 2 == 0:
            bit = (lon_idx >> (lon_bits - 1 - i // 2)) & 1
        else:
            bit = (lat_idx >> (lat_bits - 1 - i // 2)) & 1
        value = (value << 1) | bit
    return "".join(ALPHABET[(value >> (5 * (precision - 1 - k))) & 31] for k in range(precision))


def _cell_index(lat: float, lon: float, precision: int) -> tuple[int, int]:
    lon_bits, lat_bits = _bit_split(precision)
    return _axis_bits(lon, -180.0, 180.0, lon_bits), _axis_bits(lat, -90.0, 90.0, lat_bits)


def encode(lat: float, lon: float, precision: int = MAX_PRECISION) -> str:
    _check_precision(precision)
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise OutOfBounds(f"({lat}, {lon}) is outside the world")
    lon_idx, lat_idx = _cell_index(lat, lon, precision)
    return _interleave(lon_idx, lat_idx, precision)


def decode(hash_: str) -> GeoBox:
    lat_lo, lat_hi, lon_lo, lon_hi = -90.0, 90.0, -180.0, 180.0
    even = True
    for ch in hash_:
        try:
            v = _DECODE[ch]
        except KeyError:
            raise BadCharacter(f"{ch!r} is not a geohash character") from None
        for shift in range(4, -1, -1):
            bit = (v >> shift) & 1
            if even:
                mid = (lon_lo + lon_hi) / 2
                if bit:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if bit:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even = not even
    return GeoBox(lat_lo, lat_hi, lon_lo, lon_hi)


def cover(box: GeoBox, precision: int, limit: int = DEFAULT_COVER_LIMIT) -> list[str]:
    """Sorted hashes of every cell that can hold a point of ``box``.

    Cells are half-open (a point on a shared edge belongs to the upper or
    eastern cell, as in :func:`encode`), so this is exactly the set of
    hashes that points inside the box encode to at this precision.
    """
    _check_precision(precision)
    lon0, lat0 = _cell_index(box.lat_min, box.long_min, precision)
    lon1, lat1 = _cell_index(box.lat_max, box.long_max, precision)
    count = (lon1 - lon0 + 1) * (lat1 - lat0 + 1)
    if count > limit:
        raise PrecisionTooFine(f"cover needs {count} cells at precision {precision} (limit {limit})")
    return sorted(
        _interleave(i, j, precision) for i in range(lon0, lon1 + 1) for j in range(lat0, lat1 + 1)
    )


def successor(prefix: str) -> str | None:
    """Next hash of the same length, or None after ``zzz...``."""
    chars = list(prefix)
    for pos in range(len(chars) - 1, -1, -1):
        v = _DECODE[chars[pos]]
        if v < 31:
            chars[pos] = ALPHABET[v + 1]
            return "".join(chars)
        chars[pos] = ALPHABET[0]
    return None


def prefix_runs(prefixes: Iterable[str]) -> list[tuple[str, str]]:
    """Coalesce sorted equal-length prefixes into ``(first, last)`` runs."""
    runs: list[tuple[str, str]] = []
    for p in sorted(prefixes):
        if runs and successor(runs[-1][1]) == p:
            runs[-1] = (runs[-1][0], p)
        else:
            runs.append((p, p))
    return runs


def rewrite(box: GeoBox, precision: int, limit: int = DEFAULT_COVER_LIMIT, field: str = FIELD) -> list[QuerySpec]:
    specs = []
    for first, last in prefix_runs(cover(box, precision, limit)):
        conds = [Condition(field, Op.GE, first)]
        upper = successor(last)
        if upper is not None:
            conds.append(Condition(field, Op.LT, upper))
        specs.append(QuerySpec(tuple(conds)))
    return specs


def search_box(collection, box: GeoBox, precision: int, limit: int = DEFAULT_COVER_LIMIT) -> tuple[list[Document], ScanStats]:
    """Bounding-box search as a union of geohash range queries.

    Documents must carry a ``geohash`` field encoded at ``precision`` or
    finer. Candidates are filtered on exact coordinates afterwards.
    """
    stats = ScanStats()
    seen: dict[str, Document] = {}
    for spec in rewrite(box, precision, limit):
        docs, s = collection.query(spec)
        stats += s
        for d in docs:
            seen.setdefault(d.key, d)
    return filter_brute_force(seen.values(), box.conditions()), stats
