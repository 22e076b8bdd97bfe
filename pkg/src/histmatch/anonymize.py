"""k-anonymization of histogram sets by fixed-size micro-aggregation.

Owners are partitioned into clusters of at least k members; the released set
replaces every histogram with its cluster centroid, so each released record is
exactly identical to at least k-1 others.  Cluster quality is scored by the
l1 distortion between members and their centroid, normalized by the distortion
of collapsing everything to the grand centroid.
"""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .core import Histogram, HistogramSet
from .errors import InvalidKError
from .metrics import weight_l1


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint owner clusters covering a histogram set, with their centroids."""

    clusters: tuple[tuple[str, ...], ...]
    centroids: tuple[Histogram, ...]

    def __post_init__(self):
        if len(self.clusters) != len(self.centroids):
            raise ValueError("one centroid required per cluster")
        if any(len(c) == 0 for c in self.clusters):
            raise ValueError("clusters must be non-empty")
        owners = [o for cluster in self.clusters for o in cluster]
        if len(set(owners)) != len(owners):
            raise ValueError("clusters must be disjoint")

    @property
    def g(self) -> int:
        return len(self.clusters)

    @property
    def k_achieved(self) -> int:
        return min(len(c) for c in self.clusters)

    @cached_property
    def cluster_of(self) -> dict[str, int]:
        return {o: q for q, cluster in enumerate(self.clusters) for o in cluster}

    def owners(self) -> set[str]:
        return set(self.cluster_of)


def _centroid(histograms: Sequence[Histogram]) -> Histogram:
    if len(histograms) == 1:
        return histograms[0]
    total: dict[str, float] = defaultdict(float)
    for h in histograms:
        for loc, p in h.mass.items():
            total[loc] += p
    inv = 1.0 / len(histograms)
    return Histogram.from_mass({loc: v * inv for loc, v in total.items()})


def microaggregate(histograms: HistogramSet, k: int) -> tuple[ClusterPartition, HistogramSet]:
    """Partition owners into clusters of size >= k and release the centroids.

    Fixed-size heuristic: repeatedly take the record farthest (in l1) from the
    centroid of the remaining records, group it with its k-1 nearest
    neighbours, and once fewer than 2k records remain they form the final
    cluster.  Every cluster size lies in [k, 2k-1].
    """
    n = len(histograms)
    if not 1 <= k <= n:
        raise InvalidKError(f"k={k} outside 1..{n}")
    hists = histograms.histograms
    remaining = list(range(n))
    clusters: list[tuple[int, ...]] = []
    while len(remaining) >= 2 * k:
        center = _centroid([hists[i] for i in remaining])
        far_pos = max(range(len(remaining)), key=lambda pos: weight_l1(hists[remaining[pos]], center))
        anchor = remaining.pop(far_pos)
        by_distance = sorted(range(len(remaining)), key=lambda pos: weight_l1(hists[remaining[pos]], hists[anchor]))
        chosen = sorted(by_distance[: k - 1], reverse=True)
        members = [anchor] + [remaining.pop(pos) for pos in chosen]
        clusters.append(tuple(sorted(members)))
    if remaining:
        clusters.append(tuple(remaining))

    centroids = tuple(_centroid([hists[i] for i in cluster]) for cluster in clusters)
    centroid_by_index: dict[int, Histogram] = {}
    for cluster, centroid in zip(clusters, centroids):
        for i in cluster:
            centroid_by_index[i] = centroid
    released = HistogramSet(
        entries=tuple((owner, centroid_by_index[i]) for i, (owner, _) in enumerate(histograms.entries)),
        labeled=histograms.labeled,
    )
    owners = histograms.owners
    partition = ClusterPartition(
        clusters=tuple(tuple(owners[i] for i in cluster) for cluster in clusters),
        centroids=centroids,
    )
    return partition, released


def information_loss(partition: ClusterPartition, histograms: HistogramSet) -> float:
    """Normalized information loss of a partitioning, in [0, 1].

    Within-cluster l1 distortion divided by the distortion of replacing every
    histogram with the grand centroid.  0 for the identity partition, 1 for a
    single cluster; if all inputs are identical no information can be lost and
    the result is 0 by convention.
    """
    if partition.owners() != set(histograms.owners):
        raise ValueError("partition does not cover the histogram set's owners")
    numerator = math.fsum(
        weight_l1(histograms.histogram(owner), centroid)
        for cluster, centroid in zip(partition.clusters, partition.centroids)
        for owner in cluster
    )
    grand = _centroid(list(histograms.histograms))
    denominator = math.fsum(weight_l1(h, grand) for h in histograms.histograms)
    if denominator == 0.0:
        return 0.0
    return numerator / denominator


def verify_k_anonymity(released: HistogramSet, k: int) -> bool:
    """True when every released histogram's sparse map is exactly equal to the
    maps of at least k-1 other released histograms."""
    counts = Counter(h.key() for h in released.histograms)
    return all(c >= k for c in counts.values())
