"""Seeded mock charger datasets.

Each field draws from its own ``random.Random`` stream (Mersenne Twister,
seeded from SHA-256 of ``"<seed>:<field>"``), so the output for a seed is
identical on every platform and adding a field never perturbs the others.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import asdict, dataclass
from typing import IO, Iterator

from .core import ChargerRecord, Document, InvalidValue, write_jsonl

PRNG_ALGORITHM = "mt19937/sha256-per-field"


def _levels(lo: float, hi: float, count: int = 5) -> tuple[float, ...]:
    step = (hi - lo) / (count - 1)
    return tuple(round(lo + i * step, 10) for i in range(count))


DEFAULT_LAT_LEVELS = _levels(43.19, 47.9)
DEFAULT_LONG_LEVELS = _levels(-124.9, -120.1)
DEFAULT_NAMES = ("Howard", "Gomez", "Singh", "Shipman", "Durnin")
DEFAULT_STREETS = ("Cedar Ct", "118th Ave", "119th Ave", "Maple Hill Ln")
DEFAULT_TYPES = ("level1", "level2")


@dataclass(frozen=True)
class GenSpec:
    n: int
    seed: int = 0
    lat_levels: tuple[float, ...] = DEFAULT_LAT_LEVELS
    long_levels: tuple[float, ...] = DEFAULT_LONG_LEVELS
    names: tuple[str, ...] = DEFAULT_NAMES
    streets: tuple[str, ...] = DEFAULT_STREETS
    house_range: tuple[int, int] = (10000, 11900)
    types: tuple[str, ...] = DEFAULT_TYPES
    # draw lat/long uniformly between the extreme levels instead of from the levels
    continuous: bool = False

    def __post_init__(self) -> None:
        for name in ("lat_levels", "long_levels", "names", "streets", "types", "house_range"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.n < 0:
            raise InvalidValue("n must be >= 0")
        for name in ("lat_levels", "long_levels", "names", "streets", "types"):
            if not getattr(self, name):
                raise InvalidValue(f"{name} must be non-empty")
        lo, hi = self.house_range
        if not lo < hi:
            raise InvalidValue("house_range must satisfy lo < hi")

    def header(self) -> dict:
        out = asdict(self)
        out["prng"] = PRNG_ALGORITHM
        return out


def field_stream(seed: int, name: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def iter_records(spec: GenSpec) -> Iterator[ChargerRecord]:
    s = spec
    names = field_stream(s.seed, "name")
    houses = field_stream(s.seed, "house")
    streets = field_stream(s.seed, "street")
    lats = field_stream(s.seed, "latitude")
    longs = field_stream(s.seed, "longitude")
    types = field_stream(s.seed, "type")
    h_lo, h_hi = s.house_range
    for i in range(1, s.n + 1):
        if s.continuous:
            lat = lats.uniform(min(s.lat_levels), max(s.lat_levels))
            lon = longs.uniform(min(s.long_levels), max(s.long_levels))
        else:
            lat = s.lat_levels[lats.randrange(len(s.lat_levels))]
            lon = s.long_levels[longs.randrange(len(s.long_levels))]
        yield ChargerRecord(
            id=i,
            name=s.names[names.randrange(len(s.names))],
            address=f"{houses.randint(h_lo, h_hi)} {s.streets[streets.randrange(len(s.streets))]}",
            latitude=lat,
            longitude=lon,
            type=s.types[types.randrange(len(s.types))],
        )


def generate(spec: GenSpec) -> list[ChargerRecord]:
    return list(iter_records(spec))


_WS = re.compile(r"\s+")


def derive_key(record: ChargerRecord) -> str:
    return f"{record.id}_{_WS.sub('', record.address)}"


def to_document(record: ChargerRecord, geohash_precision: int | None = None) -> Document:
    fields = record.as_fields()
    if geohash_precision:
        from .geohash import encode

        fields["geohash"] = encode(record.latitude, record.longitude, geohash_precision)
    return Document(derive_key(record), fields)


def documents(spec: GenSpec, geohash_precision: int | None = None) -> list[Document]:
    return [to_document(r, geohash_precision) for r in iter_records(spec)]


def write_dataset(spec: GenSpec, fp: IO[str], geohash_precision: int | None = None) -> int:
    header = {"dataset": spec.header()}
    if geohash_precision:
        header["dataset"]["geohash_precision"] = geohash_precision
    return write_jsonl(
        (to_document(r, geohash_precision) for r in iter_records(spec)), fp, header=header
    )
