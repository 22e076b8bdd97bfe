"""Pairwise histogram weights and their information-theoretic building blocks.

Four measures are supported: the divergence weight (sum of KL divergences to
the midpoint distribution), l1 distance, cosine distance, and the dot-product
similarity.  Logarithms are natural throughout, so divergence values are in
nats and the divergence weight lies in [0, 2 ln 2].

Pairwise functions accept either :class:`~histmatch.core.Histogram` objects or
plain ``{location: probability}`` mappings.  ``weight_matrix`` evaluates a
whole set-against-set weight matrix through an inverted index over locations,
which costs time proportional to the co-occurring support instead of
N * N' * M.
"""
from __future__ import annotations

import math
from enum import Enum
from typing import Mapping

import numpy as np

from .core import Histogram, HistogramSet
from .errors import AbsoluteContinuityError

LN2 = math.log(2.0)

# Upper bound of the divergence weight, attained on disjoint supports.
MAX_DIVERGENCE_WEIGHT = 2.0 * LN2


class MetricKind(Enum):
    """Selectable pairwise measures.

    DOT is similarity-oriented (larger is closer); the others are distances.
    """

    PROPOSED = "proposed"
    L1 = "l1"
    COSINE = "cosine"
    DOT = "dot"

    @classmethod
    def from_token(cls, token: str) -> "MetricKind":
        try:
            return cls(token.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown metric {token!r}; expected one of: {valid}") from None

    @property
    def is_similarity(self) -> bool:
        return self is MetricKind.DOT

    @property
    def max_distance(self) -> float:
        """Largest distance-oriented weight the metric can produce."""
        return _MAX_DISTANCE[self]


_MAX_DISTANCE = {
    MetricKind.PROPOSED: MAX_DIVERGENCE_WEIGHT,
    MetricKind.L1: 2.0,
    MetricKind.COSINE: 1.0,
    MetricKind.DOT: 1.0,  # stored as 1 - dot
}


def _mass(h: Histogram | Mapping[str, float]) -> Mapping[str, float]:
    return h.mass if isinstance(h, Histogram) else h


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence sum(p ln(p/q)) in nats.

    Requires support(p) to be contained in support(q); terms with p(l) = 0 are
    skipped (0 ln 0 = 0).
    """
    pm, qm = _mass(p), _mass(q)
    terms = []
    for loc, pl in pm.items():
        if pl <= 0.0:
            continue
        ql = qm.get(loc, 0.0)
        if ql <= 0.0:
            raise AbsoluteContinuityError(f"p has mass at {loc!r} where q has none")
        terms.append(pl * math.log(pl / ql))
    return max(0.0, math.fsum(terms))


def shannon_entropy(p) -> float:
    """Shannon entropy -sum(p ln p) in nats."""
    return max(0.0, -math.fsum(pl * math.log(pl) for pl in _mass(p).values() if pl > 0.0))


def weight_proposed(p, q) -> float:
    """Divergence weight D(p || m) + D(q || m) with m the midpoint (p + q) / 2.

    Zero exactly when p equals q, 2 ln 2 when the supports are disjoint,
    symmetric in its arguments.
    """
    pm, qm = _mass(p), _mass(q)
    terms = []
    for loc, pl in pm.items():
        if pl <= 0.0:
            continue
        m = 0.5 * (pl + qm.get(loc, 0.0))
        terms.append(pl * math.log(pl / m))
    for loc, ql in qm.items():
        if ql <= 0.0:
            continue
        m = 0.5 * (ql + pm.get(loc, 0.0))
        terms.append(ql * math.log(ql / m))
    return min(max(0.0, math.fsum(terms)), MAX_DIVERGENCE_WEIGHT)


def weight_l1(p, q) -> float:
    """l1 distance over the support union."""
    pm, qm = _mass(p), _mass(q)
    terms = [abs(pl - qm.get(loc, 0.0)) for loc, pl in pm.items()]
    terms.extend(ql for loc, ql in qm.items() if loc not in pm)
    return min(max(0.0, math.fsum(terms)), 2.0)


def _dot(pm: Mapping[str, float], qm: Mapping[str, float]) -> float:
    if len(qm) < len(pm):
        pm, qm = qm, pm
    return math.fsum(pl * qm.get(loc, 0.0) for loc, pl in pm.items())


def _l2_norm(m: Mapping[str, float]) -> float:
    return math.sqrt(math.fsum(v * v for v in m.values()))


def weight_dot(p, q) -> float:
    """Dot-product similarity over the common support (larger means closer)."""
    return min(max(0.0, _dot(_mass(p), _mass(q))), 1.0)


def weight_cosine(p, q) -> float:
    """Cosine distance 1 - <p, q> / (|p| |q|); norms are positive on the simplex."""
    pm, qm = _mass(p), _mass(q)
    if pm == qm:
        return 0.0
    value = 1.0 - _dot(pm, qm) / (_l2_norm(pm) * _l2_norm(qm))
    return min(max(0.0, value), 1.0)


_PAIR_FUNCS = {
    MetricKind.PROPOSED: weight_proposed,
    MetricKind.L1: weight_l1,
    MetricKind.COSINE: weight_cosine,
    MetricKind.DOT: weight_dot,
}


def pair_weight(kind: MetricKind, p, q) -> float:
    """The metric's native value: a similarity for DOT, a distance otherwise."""
    return _PAIR_FUNCS[kind](p, q)


def pair_distance(kind: MetricKind, p, q) -> float:
    """Distance-oriented value; similarities are flipped so smaller is closer."""
    value = pair_weight(kind, p, q)
    return 1.0 - value if kind.is_similarity else value


def _postings(hset: HistogramSet) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Inverted index: location -> (indices of histograms with mass there, masses)."""
    by_loc: dict[str, tuple[list[int], list[float]]] = {}
    for idx, (_, hist) in enumerate(hset.entries):
        for loc, pl in hist.mass.items():
            if pl <= 0.0:
                continue
            bucket = by_loc.setdefault(loc, ([], []))
            bucket[0].append(idx)
            bucket[1].append(pl)
    return {
        loc: (np.asarray(ix, dtype=np.int64), np.asarray(ps, dtype=np.float64))
        for loc, (ix, ps) in by_loc.items()
    }


def weight_matrix(left: HistogramSet, right: HistogramSet, metric: MetricKind) -> np.ndarray:
    """Dense distance-oriented weight matrix between two histogram sets.

    Numerically equivalent to calling ``pair_distance`` on every pair.
    """
    n, m = len(left), len(right)
    lpost = _postings(left)
    rpost = _postings(right)
    lsums = np.array([math.fsum(h.mass.values()) for h in left.histograms])
    rsums = np.array([math.fsum(h.mass.values()) for h in right.histograms])

    if metric is MetricKind.PROPOSED:
        w = LN2 * np.add.outer(lsums, rsums)
        for loc, (li, lp) in lpost.items():
            hit = rpost.get(loc)
            if hit is None:
                continue
            rj, rp = hit
            ps = lp[:, None]
            qs = rp[None, :]
            s = ps + qs
            w[np.ix_(li, rj)] -= s * np.log(s) - ps * np.log(ps) - qs * np.log(qs)
        np.clip(w, 0.0, MAX_DIVERGENCE_WEIGHT, out=w)
        return w

    if metric is MetricKind.L1:
        w = np.add.outer(lsums, rsums)
        for loc, (li, lp) in lpost.items():
            hit = rpost.get(loc)
            if hit is None:
                continue
            rj, rp = hit
            w[np.ix_(li, rj)] -= 2.0 * np.minimum(lp[:, None], rp[None, :])
        np.clip(w, 0.0, 2.0, out=w)
        return w

    # COSINE and DOT share the dot-product accumulation.
    dots = np.zeros((n, m))
    for loc, (li, lp) in lpost.items():
        hit = rpost.get(loc)
        if hit is None:
            continue
        rj, rp = hit
        dots[np.ix_(li, rj)] += lp[:, None] * rp[None, :]
    if metric is MetricKind.COSINE:
        lnorm = np.array([_l2_norm(h.mass) for h in left.histograms])
        rnorm = np.array([_l2_norm(h.mass) for h in right.histograms])
        w = 1.0 - dots / np.outer(lnorm, rnorm)
    else:
        w = 1.0 - dots
    np.clip(w, 0.0, 1.0, out=w)
    return w


def common_support_mask(left: HistogramSet, right: HistogramSet) -> np.ndarray:
    """Boolean matrix marking the pairs whose supports intersect."""
    mask = np.zeros((len(left), len(right)), dtype=bool)
    rpost = _postings(right)
    for loc, (li, _) in _postings(left).items():
        hit = rpost.get(loc)
        if hit is not None:
            mask[np.ix_(li, hit[0])] = True
    return mask
