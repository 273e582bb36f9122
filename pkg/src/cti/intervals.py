"""Interquantile interval partitions and conformity scores.

A monotone quantile grid with edges ``q_0 <= ... <= q_K`` splits the
response axis into ``K`` half-open intervals ``(q_{k-1}, q_k]``.  The
conformity score of a response is the length of the interval it falls
into: short interval = locally dense = conforming.  Responses outside
``(q_0, q_K]`` are handled by a boundary policy, either clamped to the
nearest extreme interval or scored infinite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "BOUNDARY_POLICIES",
    "IntervalPartition",
    "ConformityScore",
    "build_partition",
    "interval_index",
    "conformity_score",
    "batch_scores",
    "scores_at",
]

# Policy for responses outside the extreme quantiles.  "clamp" assigns
# the nearest extreme interval (keeps every calibration score finite),
# "infinite" marks the response out of range with score +inf.
BOUNDARY_POLICIES = ("clamp", "infinite")


def _check_policy(policy):
    if policy not in BOUNDARY_POLICIES:
        raise ValueError(f"unknown boundary policy {policy!r}, expected one of {BOUNDARY_POLICIES}")


@dataclass(frozen=True)
class IntervalPartition:
    """The K interquantile intervals induced by one quantile grid."""

    edges: np.ndarray  # (K + 1,), non-decreasing
    lengths: np.ndarray  # (K,), edge differences

    @property
    def n_intervals(self):
        return len(self.lengths)

    @property
    def total_range(self):
        return float(self.edges[-1] - self.edges[0])


@dataclass(frozen=True)
class ConformityScore:
    """Score of one (partition, response) pair.

    ``value`` is the covering interval's length (or +inf when the
    response is out of range under the "infinite" policy, in which case
    ``index`` is None).  ``index`` is 1-based to match the interval
    numbering ``1..K``; ``clamped`` marks out-of-range responses that
    were assigned an extreme interval.
    """

    value: float
    index: int | None
    clamped: bool


def build_partition(grid):
    """Partition the response axis at the grid edges.

    Parameters
    ----------
    grid : array-like of shape (K + 1,)
        Monotone quantile estimates.

    Returns
    -------
    IntervalPartition
    """
    edges = np.asarray(grid, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError(f"grid must be 1-D with at least 2 edges, got shape {edges.shape}")
    if np.isnan(edges).any():
        raise DataError("grid contains NaN")
    if np.any(np.diff(edges) < 0):
        raise ValueError("grid is not monotone; apply enforce_monotone first")
    return IntervalPartition(edges=edges, lengths=np.diff(edges))


def interval_index(partition, y, policy="clamp"):
    """1-based index of the interval containing ``y``.

    Finds the smallest ``k`` with ``edges[k-1] < y <= edges[k]``; empty
    zero-length intervals can never be selected.  Out-of-range responses
    follow the boundary policy: clamp returns the nearest extreme
    interval (flagged), infinite returns ``(None, False)``.

    Returns
    -------
    (index, clamped) : tuple of (int | None, bool)
    """
    _check_policy(policy)
    if np.isnan(y):
        raise DataError("response is NaN")
    edges = partition.edges
    k = int(np.searchsorted(edges, y, side="left"))
    n = partition.n_intervals
    if 1 <= k <= n:
        return k, False
    if policy == "infinite":
        return None, False
    return (1, True) if k < 1 else (n, True)


def conformity_score(partition, y, policy="clamp"):
    """Length of the interval containing ``y`` (+inf when out of range
    under the infinite policy)."""
    k, clamped = interval_index(partition, y, policy)
    if k is None:
        return ConformityScore(value=np.inf, index=None, clamped=False)
    return ConformityScore(value=float(partition.lengths[k - 1]), index=k, clamped=clamped)


def batch_scores(edge_matrix, y, policy="clamp"):
    """Conformity scores for many (grid, response) pairs at once.

    Parameters
    ----------
    edge_matrix : ndarray of shape (n, K + 1)
        One monotone grid per row.
    y : ndarray of shape (n,)
    policy : str

    Returns
    -------
    (values, clamped) : pair of ndarrays of shape (n,)
        Score per row (+inf for out-of-range rows under the infinite
        policy) and the clamp flags.
    """
    _check_policy(policy)
    edges = np.asarray(edge_matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isnan(y).any():
        raise DataError("responses contain NaN")
    n, m = edges.shape
    if y.shape != (n,):
        raise ValueError(f"y has shape {y.shape}, expected ({n},)")
    # row-wise searchsorted: edge ranks within each sorted row
    k = np.sum(edges < y[:, None], axis=1)  # == searchsorted(edges[i], y[i], "left")
    low = k < 1
    high = k > m - 1
    kk = np.clip(k, 1, m - 1)
    lengths = edges[np.arange(n), kk] - edges[np.arange(n), kk - 1]
    if policy == "clamp":
        return lengths, low | high
    return np.where(low | high, np.inf, lengths), np.zeros(n, dtype=bool)


def scores_at(partition, ys, policy="clamp"):
    """Conformity scores of many responses against one partition.

    Same semantics as :func:`conformity_score`, vectorized over ``ys``.

    Returns
    -------
    (values, clamped) : pair of ndarrays of shape (len(ys),)
    """
    _check_policy(policy)
    ys = np.asarray(ys, dtype=float)
    if np.isnan(ys).any():
        raise DataError("responses contain NaN")
    edges = partition.edges
    m = edges.size
    k = np.searchsorted(edges, ys, side="left")
    low = k < 1
    high = k > m - 1
    kk = np.clip(k, 1, m - 1)
    lengths = partition.lengths[kk - 1]
    if policy == "clamp":
        return lengths, low | high
    return np.where(low | high, np.inf, lengths), np.zeros(ys.size, dtype=bool)
