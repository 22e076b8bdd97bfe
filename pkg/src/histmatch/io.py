"""CSV and JSON serialization.

File formats:

* event log: headered CSV ``user,timestamp,location`` with integer epoch
  seconds (UTC);
* location aggregation table: headered CSV ``from,to``;
* histogram set: headered CSV ``owner,location,probability`` with rows
  grouped by owner; each owner's probabilities must sum to 1 within 1e-6 on
  load (they are renormalized exactly when slightly off);
* ground truth: headered CSV ``left_owner,right_owner``;
* match result: headered CSV ``left_owner,right_owner,weight`` plus a JSON
  summary ``{algorithm, cardinality, total_weight, runtime_ms}``;
* cluster partition: JSON ``{k, g, L, clusters}``.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .anonymize import ClusterPartition
from .core import (
    MASS_ATOL,
    EventLog,
    EventRecord,
    GroundTruth,
    Histogram,
    HistogramSet,
)
from .errors import FileFormatError
from .matcher import BipartiteInstance, MatchResult

EVENT_HEADER = ["user", "timestamp", "location"]
AGGREGATION_HEADER = ["from", "to"]
HISTOGRAM_HEADER = ["owner", "location", "probability"]
TRUTH_HEADER = ["left_owner", "right_owner"]
MATCH_HEADER = ["left_owner", "right_owner", "weight"]

HISTOGRAM_SUM_ATOL = 1e-6


def _read_rows(path: str | Path, expected_header: list[str]) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(f"{path}: empty file, expected header {expected_header}") from None
        if [h.strip() for h in header] != expected_header:
            raise FileFormatError(f"{path}: header {header!r} does not match {expected_header}")
        return [row for row in reader if row]


def read_event_log(path: str | Path) -> EventLog:
    records = []
    for lineno, row in enumerate(_read_rows(path, EVENT_HEADER), start=2):
        if len(row) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        user, ts, location = (c.strip() for c in row)
        try:
            timestamp = int(ts)
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: timestamp {ts!r} is not an integer") from None
        if timestamp < 0:
            raise FileFormatError(f"{path}:{lineno}: negative timestamp {timestamp}")
        records.append(EventRecord(user=user, timestamp=timestamp, location=location))
    return EventLog(records=tuple(records))


def read_aggregation_table(path: str | Path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for lineno, row in enumerate(_read_rows(path, AGGREGATION_HEADER), start=2):
        if len(row) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        src, dst = (c.strip() for c in row)
        if src in mapping:
            raise FileFormatError(f"{path}:{lineno}: duplicate source location {src!r}")
        mapping[src] = dst
    return mapping


def read_histogram_set(path: str | Path, labeled: bool) -> HistogramSet:
    by_owner: dict[str, dict[str, float]] = {}
    for lineno, row in enumerate(_read_rows(path, HISTOGRAM_HEADER), start=2):
        if len(row) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        owner, location, prob_text = (c.strip() for c in row)
        try:
            prob = float(prob_text)
        except ValueError:
            raise FileFormatError(f"{path}:{lineno}: probability {prob_text!r} is not a number") from None
        if not math.isfinite(prob) or prob <= 0.0:
            raise FileFormatError(f"{path}:{lineno}: probability must be finite and positive")
        mass = by_owner.setdefault(owner, {})
        if location in mass:
            raise FileFormatError(f"{path}:{lineno}: duplicate location {location!r} for owner {owner!r}")
        mass[location] = prob

    entries = []
    for owner, mass in by_owner.items():
        total = math.fsum(mass.values())
        if abs(total - 1.0) > HISTOGRAM_SUM_ATOL:
            raise FileFormatError(
                f"{path}: probabilities for owner {owner!r} sum to {total!r}, not 1 +/- {HISTOGRAM_SUM_ATOL}"
            )
        if abs(total - 1.0) > MASS_ATOL:
            mass = {loc: p / total for loc, p in mass.items()}
        entries.append((owner, Histogram.from_mass(mass)))
    return HistogramSet(entries=tuple(entries), labeled=labeled)


def write_histogram_set(hset: HistogramSet, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_HEADER)
        for owner, hist in hset.entries:
            for location, prob in hist.mass.items():
                writer.writerow([owner, location, repr(prob)])


def read_truth(path: str | Path) -> GroundTruth:
    mapping: dict[str, str] = {}
    for lineno, row in enumerate(_read_rows(path, TRUTH_HEADER), start=2):
        if len(row) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
        left, right = (c.strip() for c in row)
        if left in mapping:
            raise FileFormatError(f"{path}:{lineno}: duplicate left owner {left!r}")
        mapping[left] = right
    return GroundTruth(mapping=mapping)


def write_truth(truth: GroundTruth, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_HEADER)
        for left, right in truth.mapping.items():
            writer.writerow([left, right])


def write_match_result(result: MatchResult, instance: BipartiteInstance, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MATCH_HEADER)
        for i, j, weight in result.pairs:
            writer.writerow([instance.left.owners[i], instance.right.owners[j], repr(weight)])


def match_summary(result: MatchResult, runtime_ms: dict[str, float]) -> dict:
    return {
        "algorithm": result.algorithm,
        "cardinality": len(result.pairs),
        "total_weight": result.total_weight,
        "runtime_ms": runtime_ms,
    }


def write_match_summary(result: MatchResult, runtime_ms: dict[str, float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(match_summary(result, runtime_ms), fh, indent=2)
        fh.write("\n")


def write_partition(partition: ClusterPartition, loss: float, path: str | Path) -> None:
    payload = {
        "k": partition.k_achieved,
        "g": partition.g,
        "L": loss,
        "clusters": [list(cluster) for cluster in partition.clusters],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
