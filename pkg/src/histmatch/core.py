"""Domain types and dataset transforms.

Histograms are stored sparsely (location id -> probability); the location
alphabet is implicit and absent ids carry probability zero.  All types are
immutable after construction and all operations are pure functions.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .errors import (
    EmptyStringError,
    InvalidCoordinateError,
    ZeroMassAfterSuppressionError,
)

# Absolute tolerance for "probabilities sum to one" checks.
MASS_ATOL = 1e-9

# Mean Earth radius in meters, used by the local equirectangular projection.
EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct location identifiers."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet contains duplicate symbols")
        if any(not s for s in self.symbols):
            raise ValueError("alphabet symbols must be non-empty strings")

    @classmethod
    def from_symbols(cls, symbols: Iterable[str]) -> "Alphabet":
        return cls(tuple(dict.fromkeys(symbols)))

    @classmethod
    def from_histogram_sets(cls, *sets: "HistogramSet") -> "Alphabet":
        """Union of the locations observed in any of the given sets."""
        seen: dict[str, None] = {}
        for hset in sets:
            for _, hist in hset.entries:
                for loc in hist.mass:
                    seen.setdefault(loc)
        return cls(tuple(seen))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.symbols)}

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def index(self, symbol: str) -> int:
        return self._index[symbol]


@dataclass(frozen=True)
class EventRecord:
    """One timestamped observation of a user at a location."""

    user: str
    timestamp: float  # seconds since the epoch, UTC
    location: str

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"negative timestamp {self.timestamp!r}")


@dataclass(frozen=True)
class EventLog:
    """A sequence of event records; ordering carries no meaning."""

    records: tuple[EventRecord, ...]

    @classmethod
    def from_records(cls, records: Iterable[EventRecord]) -> "EventLog":
        return cls(tuple(records))

    def __len__(self) -> int:
        return len(self.records)

    def users(self) -> set[str]:
        return {rec.user for rec in self.records}


@dataclass(frozen=True)
class Histogram:
    """Sparse empirical distribution over location identifiers.

    Only strictly positive probabilities are stored.  ``sample_count`` is the
    number of observations the histogram was built from (0 when synthetic or
    externally supplied).
    """

    mass: dict[str, float]
    support_count: int
    sample_count: int = 0

    def __post_init__(self):
        if not self.mass:
            raise ValueError("histogram must have at least one entry")
        if self.support_count != len(self.mass):
            raise ValueError("support_count does not match the stored entries")
        if any(p <= 0.0 for p in self.mass.values()):
            raise ValueError("histogram entries must be strictly positive")
        total = math.fsum(self.mass.values())
        if abs(total - 1.0) > MASS_ATOL:
            raise ValueError(f"histogram mass sums to {total!r}, not 1")

    @classmethod
    def from_mass(cls, mass: Mapping[str, float], sample_count: int = 0) -> "Histogram":
        m = dict(mass)
        return cls(mass=m, support_count=len(m), sample_count=sample_count)

    def probability(self, location: str) -> float:
        return self.mass.get(location, 0.0)

    def key(self) -> tuple:
        """Canonical value of the sparse map, for exact-equality grouping."""
        return tuple(sorted(self.mass.items()))


@dataclass(frozen=True)
class HistogramSet:
    """Ordered collection of (owner id, histogram) pairs."""

    entries: tuple[tuple[str, Histogram], ...]
    labeled: bool

    def __post_init__(self):
        owners = [o for o, _ in self.entries]
        if len(set(owners)) != len(owners):
            raise ValueError("owner ids must be unique within a histogram set")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Histogram]], labeled: bool) -> "HistogramSet":
        return cls(tuple((o, h) for o, h in pairs), labeled)

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def owners(self) -> tuple[str, ...]:
        return tuple(o for o, _ in self.entries)

    @cached_property
    def histograms(self) -> tuple[Histogram, ...]:
        return tuple(h for _, h in self.entries)

    @cached_property
    def _owner_index(self) -> dict[str, int]:
        return {o: i for i, (o, _) in enumerate(self.entries)}

    def index_of(self, owner: str) -> int:
        return self._owner_index[owner]

    def histogram(self, owner: str) -> Histogram:
        return self.entries[self._owner_index[owner]][1]


@dataclass(frozen=True)
class GroundTruth:
    """Partial injective map from unlabeled owner ids to labeled owner ids."""

    mapping: dict[str, str]

    def __post_init__(self):
        values = list(self.mapping.values())
        if len(set(values)) != len(values):
            raise ValueError("ground-truth mapping must be injective")

    def __len__(self) -> int:
        return len(self.mapping)

    @cached_property
    def inverse(self) -> dict[str, str]:
        return {v: k for k, v in self.mapping.items()}


def build_histogram(events: Iterable[str]) -> Histogram:
    """Empirical distribution of a sequence of location ids (count / length)."""
    counts: dict[str, int] = {}
    for loc in events:
        counts[loc] = counts.get(loc, 0) + 1
    t = sum(counts.values())
    if t == 0:
        raise EmptyStringError("cannot build a histogram from an empty sequence")
    mass = {loc: c / t for loc, c in counts.items()}
    return Histogram(mass=mass, support_count=len(mass), sample_count=t)


def split_by_period(log: EventLog, boundary: float) -> tuple[EventLog, EventLog]:
    """Split into records strictly before the boundary and records at or after it."""
    before = tuple(r for r in log.records if r.timestamp < boundary)
    after = tuple(r for r in log.records if r.timestamp >= boundary)
    return EventLog(before), EventLog(after)


def filter_active_users(a: EventLog, b: EventLog) -> set[str]:
    """Users with at least one record in each of the two logs."""
    return a.users() & b.users()


def histograms_by_user(
    log: EventLog, labeled: bool, users: set[str] | None = None
) -> HistogramSet:
    """Per-user histograms of an event log, optionally restricted to a user subset.

    Owners appear in sorted order so ingestion is reproducible.
    """
    sequences: dict[str, list[str]] = defaultdict(list)
    for rec in log.records:
        if users is None or rec.user in users:
            sequences[rec.user].append(rec.location)
    entries = tuple((u, build_histogram(sequences[u])) for u in sorted(sequences))
    return HistogramSet(entries=entries, labeled=labeled)


def aggregate_locations(h: Histogram, mapping: Mapping[str, str]) -> Histogram:
    """Merge probability mass along a location relabeling; unmapped ids self-map."""
    merged: dict[str, float] = defaultdict(float)
    for loc, p in h.mass.items():
        merged[mapping.get(loc, loc)] += p
    return Histogram(mass=dict(merged), support_count=len(merged), sample_count=h.sample_count)


def quantize_geo(lat: float, lon: float, cell_side: float, origin: tuple[float, float]) -> str:
    """Grid-cell key ``"row:col"`` of a point under a local equirectangular projection.

    Offsets are measured in meters north and east of the origin with the
    meters-per-degree scale fixed at the origin latitude, then floor-divided
    by the cell side.
    """
    lat0, lon0 = origin
    if not all(map(math.isfinite, (lat, lon, lat0, lon0))):
        raise InvalidCoordinateError(f"non-finite coordinate ({lat!r}, {lon!r})")
    if cell_side <= 0:
        raise ValueError("cell_side must be positive")
    north = math.radians(lat - lat0) * EARTH_RADIUS_M
    east = math.radians(lon - lon0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
    return f"{math.floor(north / cell_side)}:{math.floor(east / cell_side)}"


def suppress_and_renormalize(h: Histogram, keep: set[str]) -> Histogram:
    """Restrict a histogram to the kept locations and rescale to total mass one."""
    if keep.issuperset(h.mass):
        return h
    kept = {loc: p for loc, p in h.mass.items() if loc in keep}
    total = math.fsum(kept.values())
    if not kept or total <= 0.0:
        raise ZeroMassAfterSuppressionError("histogram has no mass on the kept locations")
    mass = {loc: p / total for loc, p in kept.items()}
    return Histogram(mass=mass, support_count=len(mass), sample_count=h.sample_count)
