"""Weighted bipartite matching between histogram sets.

Solvers:

* ``match_min_weight`` (A1): exact minimum-weight maximal matching, i.e. an
  assignment covering every left node, via the Hungarian method.
* ``match_cardinality`` (A2): exact minimum-weight matching with a fixed
  number of pairs (minimum-cost imperfect matching), via successive shortest
  augmenting paths with node potentials.
* ``match_bruteforce``: exhaustive enumeration oracle for small instances.
* ``match_greedy``: cheap approximation that repeatedly takes the globally
  lightest remaining edge.

All solvers minimize; similarity weights are converted to distances when the
instance is built.  Pruned pairs are materialized at the metric's maximal
distance, so every solver sees the same dense cost structure.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import HistogramSet
from .errors import (
    InvalidCardinalityError,
    MetricMismatchError,
    SwapSidesError,
    TooLargeForOracleError,
)
from .metrics import MetricKind, common_support_mask, shannon_entropy, weight_matrix

ORACLE_LIMIT = 8

TOTAL_WEIGHT_ATOL = 1e-9


@dataclass(frozen=True)
class MatchResult:
    """A partial injective assignment of left indices to right indices."""

    pairs: tuple[tuple[int, int, float], ...]
    total_weight: float
    algorithm: str

    def __post_init__(self):
        lefts = [i for i, _, _ in self.pairs]
        rights = [j for _, j, _ in self.pairs]
        if len(set(lefts)) != len(lefts) or len(set(rights)) != len(rights):
            raise ValueError("matching reuses a left or right index")
        if abs(self.total_weight - math.fsum(w for _, _, w in self.pairs)) > TOTAL_WEIGHT_ATOL:
            raise ValueError("total_weight disagrees with the sum of pair weights")

    def __len__(self) -> int:
        return len(self.pairs)

    def as_mapping(self) -> dict[int, int]:
        return {i: j for i, j, _ in self.pairs}


@dataclass(frozen=True)
class BipartiteInstance:
    """Two histogram sets plus their dense, distance-oriented weight matrix.

    ``weights[i, j]`` always holds a solvable value: pruned pairs are filled
    with the metric's maximal distance.  ``present`` marks which pairs carry a
    stored edge; ``None`` means all of them.
    """

    left: HistogramSet
    right: HistogramSet
    metric: MetricKind
    weights: np.ndarray
    present: np.ndarray | None = None

    def __post_init__(self):
        if self.weights.shape != (len(self.left), len(self.right)):
            raise ValueError("weight matrix shape does not match the histogram sets")
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")

    @property
    def n_left(self) -> int:
        return self.weights.shape[0]

    @property
    def n_right(self) -> int:
        return self.weights.shape[1]

    @property
    def edge_count(self) -> int:
        if self.present is None:
            return self.weights.size
        return int(self.present.sum())

    def edges(self, i: int) -> list[tuple[int, float]]:
        """Stored edges of left node ``i`` as (right index, weight) pairs."""
        row = self.weights[i]
        if self.present is None:
            return [(j, float(row[j])) for j in range(self.n_right)]
        return [(int(j), float(row[j])) for j in np.flatnonzero(self.present[i])]


def build_instance(
    left: HistogramSet,
    right: HistogramSet,
    metric: MetricKind,
    prune: bool = False,
) -> BipartiteInstance:
    """Compute all pairwise weights between two histogram sets.

    With ``prune`` and the divergence metric, disjoint-support pairs are
    dropped from the stored edge set; their matrix slots keep the maximal
    distance, which is exactly their weight, so solving is unaffected.
    Pruning is a no-op for the other metrics.
    """
    if len(left) == 0 or len(right) == 0:
        raise ValueError("histogram sets must be non-empty")
    w = weight_matrix(left, right, metric)
    present = None
    if prune and metric is MetricKind.PROPOSED:
        present = common_support_mask(left, right)
        w = np.where(present, w, metric.max_distance)
    return BipartiteInstance(left=left, right=right, metric=metric, weights=w, present=present)


def _result(weights: np.ndarray, pairs: list[tuple[int, int]], algorithm: str) -> MatchResult:
    triples = tuple(
        (int(i), int(j), float(weights[i, j])) for i, j in sorted(pairs)
    )
    total = math.fsum(w for _, _, w in triples)
    return MatchResult(pairs=triples, total_weight=total, algorithm=algorithm)


def match_min_weight(instance: BipartiteInstance) -> MatchResult:
    """Exact minimum-weight maximal matching: every left node gets assigned."""
    n, m = instance.weights.shape
    if n > m:
        raise SwapSidesError(
            f"left side has {n} nodes but right side only {m}; "
            "pass the smaller set as the left (unlabeled) side"
        )
    rows, cols = linear_sum_assignment(instance.weights)
    return _result(instance.weights, list(zip(rows, cols)), "A1")


def match_cardinality(instance: BipartiteInstance, r: int) -> MatchResult:
    """Exact minimum-weight matching with exactly ``r`` pairs.

    Successive shortest augmenting paths on the flow formulation of the
    bipartite graph: after each augmentation the current flow is a
    minimum-cost matching of its own cardinality, so stopping after ``r``
    augmentations yields the optimal r-matching.
    """
    n, m = instance.weights.shape
    if not 1 <= r <= min(n, m):
        raise InvalidCardinalityError(f"cardinality {r} outside 1..{min(n, m)}")
    match_l = _successive_shortest_paths(instance.weights, r)
    pairs = [(i, int(j)) for i, j in enumerate(match_l) if j >= 0]
    return _result(instance.weights, pairs, f"A2({r})")


def _successive_shortest_paths(w: np.ndarray, r: int) -> np.ndarray:
    """Min-cost flow of value ``r`` on the bipartite graph, returned as match_l.

    Node layout: left 0..n-1, right n..n+m-1, then source and sink.  Node
    potentials keep reduced costs nonnegative so each augmentation is a plain
    Dijkstra pass; weights must be nonnegative for the initial zero potential
    to be valid.
    """
    n, m = w.shape
    source, sink = n + m, n + m + 1
    n_nodes = n + m + 2
    pot = np.zeros(n_nodes)
    match_l = np.full(n, -1, dtype=np.int64)
    match_r = np.full(m, -1, dtype=np.int64)

    for _ in range(r):
        dist = np.full(n_nodes, np.inf)
        parent = np.full(n_nodes, -1, dtype=np.int64)
        done = np.zeros(n_nodes, dtype=bool)
        dist[source] = 0.0
        rdist = dist[n : n + m]  # view over right nodes
        rparent = parent[n : n + m]
        rdone = done[n : n + m]

        while True:
            masked = np.where(done, np.inf, dist)
            u = int(np.argmin(masked))
            if not np.isfinite(masked[u]):
                break
            done[u] = True
            if u == sink:
                break
            du = dist[u]
            if u == source:
                nd = du + pot[source] - pot[:n]
                better = (match_l < 0) & ~done[:n] & (nd < dist[:n])
                dist[:n][better] = nd[better]
                parent[:n][better] = source
            elif u < n:
                nd = du + w[u] + pot[u] - pot[n : n + m]
                if match_l[u] >= 0:
                    nd[match_l[u]] = np.inf  # that edge runs right-to-left only
                better = ~rdone & (nd < rdist)
                rdist[better] = nd[better]
                rparent[better] = u
            else:
                j = u - n
                i0 = int(match_r[j])
                if i0 >= 0:
                    nd = du - w[i0, j] + pot[u] - pot[i0]
                    if not done[i0] and nd < dist[i0]:
                        dist[i0] = nd
                        parent[i0] = u
                else:
                    nd = du + pot[u] - pot[sink]
                    if nd < dist[sink]:
                        dist[sink] = nd
                        parent[sink] = u

        if not np.isfinite(dist[sink]):
            raise RuntimeError("no augmenting path; requested matching size is infeasible")

        pot += np.minimum(dist, dist[sink])

        v = int(parent[sink])  # a free right node
        while v != source:
            j = v - n
            i = int(parent[v])
            prev = int(parent[i])
            match_l[i] = j
            match_r[j] = i
            v = prev

    return match_l


@lru_cache(maxsize=None)
def _permutation_columns(m: int, r: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m), r)), dtype=np.int64)


def match_bruteforce(instance: BipartiteInstance, r: int | None = None) -> MatchResult:
    """Exhaustive enumeration oracle over all matchings of the given cardinality.

    Defaults to maximal cardinality min(N, N').  Exact, but limited to
    instances with at most ``ORACLE_LIMIT`` nodes per side.
    """
    n, m = instance.weights.shape
    if n > ORACLE_LIMIT or m > ORACLE_LIMIT:
        raise TooLargeForOracleError(f"oracle handles at most {ORACLE_LIMIT} nodes per side")
    if r is None:
        r = min(n, m)
    if not 0 <= r <= min(n, m):
        raise InvalidCardinalityError(f"cardinality {r} outside 0..{min(n, m)}")
    if r == 0:
        return MatchResult(pairs=(), total_weight=0.0, algorithm="BruteForce")

    w = instance.weights
    cols = _permutation_columns(m, r)
    arange_r = np.arange(r)
    best_total = np.inf
    best: tuple[tuple[int, ...], np.ndarray] | None = None
    for rows in itertools.combinations(range(n), r):
        sub = w[np.asarray(rows)]
        totals = sub[arange_r[None, :], cols].sum(axis=1)
        k = int(np.argmin(totals))
        if totals[k] < best_total:
            best_total = float(totals[k])
            best = (rows, cols[k])
    assert best is not None
    rows, chosen = best
    return _result(w, list(zip(rows, chosen)), "BruteForce")


def match_greedy(instance: BipartiteInstance) -> MatchResult:
    """Greedy approximation: repeatedly take the lightest edge between unmatched
    nodes until every left node is covered.  Total weight is an upper bound on
    the exact optimum."""
    n, m = instance.weights.shape
    if n > m:
        raise SwapSidesError("pass the smaller set as the left side")
    order = np.argsort(instance.weights, axis=None, kind="stable")
    used_l = np.zeros(n, dtype=bool)
    used_r = np.zeros(m, dtype=bool)
    pairs: list[tuple[int, int]] = []
    for flat in order:
        i, j = divmod(int(flat), m)
        if used_l[i] or used_r[j]:
            continue
        used_l[i] = True
        used_r[j] = True
        pairs.append((i, j))
        if len(pairs) == n:
            break
    return _result(instance.weights, pairs, "Greedy")


def generalized_log_likelihood(
    instance: BipartiteInstance, assignment: MatchResult, sample_count: int
) -> float:
    """Log-likelihood of an assignment, maximized over the unknown per-user
    distributions, when every histogram was built from a string of length
    ``sample_count``.

    Equals ``-2 T * sum_i [H(left_i) + H(right_i) + w_i]`` over the matched
    pairs.  On square instances the entropy part is the same for every
    assignment, so ranking assignments by this score (descending) reproduces
    the minimum-total-weight ranking (ascending).
    """
    if instance.metric is not MetricKind.PROPOSED:
        raise MetricMismatchError("likelihood scoring requires the divergence metric")
    if sample_count <= 0:
        raise ValueError("sample_count must be positive")
    total = math.fsum(
        shannon_entropy(instance.left.histograms[i])
        + shannon_entropy(instance.right.histograms[j])
        + w
        for i, j, w in assignment.pairs
    )
    return -2.0 * sample_count * total
