"""Weighted empirical distribution helpers.

Quantiles use the left-continuous inverse of the weighted empirical CDF:
``Q(p) = min{x : F(x) >= p}``. Ties in value are ordered by an optional
tiebreak key so that rank-based buckets are reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyPopulation

_REL_TOL = 1e-12

SPENDING_BUCKETS = (
    ("overall", None),
    ("bottom_50", 0.50),
    ("top_50", 0.50),
    ("top_30", 0.30),
    ("top_10", 0.10),
    ("top_5", 0.05),
    ("top_1", 0.01),
)


def _sorted(values, weights, tiebreak=None):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if tiebreak is None:
        order = np.argsort(values, kind="stable")
    else:
        order = np.lexsort((np.asarray(tiebreak), values))
    return values[order], weights[order], order


def weighted_quantile(values, weights, q, tiebreak=None):
    """Left-continuous weighted quantile(s) ``q`` in [0, 1]."""
    v, w, _ = _sorted(values, weights, tiebreak)
    total = w.sum()
    if v.size == 0 or total <= 0:
        raise EmptyPopulation("weighted quantile of an empty or zero-weight sample")
    cum = np.cumsum(w)
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    idx = np.searchsorted(cum, qs * total * (1 - _REL_TOL), side="left")
    idx = np.clip(idx, 0, v.size - 1)
    # zero-weight entries can never be the quantile
    pos = np.flatnonzero(w > 0)
    idx = pos[np.searchsorted(pos, idx, side="left").clip(0, pos.size - 1)]
    out = v[idx]
    return out if np.ndim(q) else float(out[0])


def weighted_median(values, weights, tiebreak=None):
    return weighted_quantile(values, weights, 0.5, tiebreak)


def weighted_mean(values, weights):
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0:
        raise EmptyPopulation("weighted mean with zero total weight")
    return float(np.dot(np.asarray(values, dtype=float), weights) / total)


def top_share_weights(values, weights, share, tiebreak=None):
    """Weight of each record lying in the top ``share`` of the weighted distribution.

    The record straddling the boundary contributes only the part of its weight
    above the ``1 - share`` cumulative level, so every bucket holds exactly its
    share of the total weight.
    """
    v, w, order = _sorted(values, weights, tiebreak)
    total = w.sum()
    cut = (1.0 - share) * total
    cum = np.cumsum(w)
    part = np.clip(cum - cut, 0.0, w)
    part[np.abs(part) <= _REL_TOL * total] = 0.0
    out = np.zeros(v.size)
    out[order] = part
    return out


def bucket_means(values, weights, tiebreak=None) -> dict[str, float]:
    """Weighted means overall and within the spending-distribution buckets."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0 or weights.sum() <= 0:
        raise EmptyPopulation("no weighted records to summarize")
    out = {"overall": weighted_mean(values, weights)}
    top_half = top_share_weights(values, weights, 0.5, tiebreak)
    out["bottom_50"] = weighted_mean(values, weights - top_half)
    for name, share in SPENDING_BUCKETS[2:]:
        out[name] = weighted_mean(values, top_share_weights(values, weights, share, tiebreak))
    return out
