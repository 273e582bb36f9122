"""Calibration and prediction-set construction, plus interval baselines.

The thresholded-interval method calibrates a single length cutoff on the
conformity scores of a held-out set: the cutoff is the
``ceil((1 + n_cal) * (1 - alpha))``-th smallest score.  Prediction sets
are then the union of all interquantile intervals no longer than the
cutoff, which may be empty, one interval, or several disjoint pieces.

Split conformal and CQR baselines are provided on top of the same
quantile models so comparisons share one model fit per family.  A
harmonic-mean score combiner lets two models back a single calibrated
pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .intervals import ConformityScore, batch_scores, scores_at

__all__ = [
    "Threshold",
    "PredictionSet",
    "BaselineResult",
    "rank_index",
    "calibrate_threshold",
    "predict_set",
    "set_contains",
    "split_conformal",
    "cqr",
    "harmonic_aggregate",
    "harmonic_batch_scores",
    "harmonic_predict_set",
]


@dataclass(frozen=True)
class Threshold:
    """Calibrated length cutoff with its order-statistic provenance."""

    t: float
    rank: int
    n_cal: int
    alpha: float


@dataclass(frozen=True)
class PredictionSet:
    """Union of disjoint closed intervals on the response axis."""

    components: np.ndarray  # (m, 2) sorted, non-overlapping
    size: float
    n_components: int

    def contains(self, y):
        """Closed membership test."""
        if np.isnan(y):
            raise DataError("response is NaN")
        if self.n_components == 0:
            return False
        lo, hi = self.components[:, 0], self.components[:, 1]
        return bool(np.any((lo <= y) & (y <= hi)))


@dataclass(frozen=True)
class BaselineResult:
    """Per-sample intervals from an interval-shaped baseline method."""

    method: str
    lo: np.ndarray
    hi: np.ndarray
    q: float
    snapped_levels: tuple | None = None
    snap_distance: float | None = None


def rank_index(n_cal, alpha):
    """Calibration order-statistic rank ``ceil((1 + n_cal) * (1 - alpha))``.

    Products that are integers up to float dust are not rounded up, so
    e.g. ``(9, 0.1) -> 9`` rather than 10.
    """
    if n_cal < 1:
        raise ValueError(f"n_cal must be >= 1, got {n_cal}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    x = (1 + n_cal) * (1.0 - alpha)
    nearest = round(x)
    if abs(x - nearest) < 1e-9:
        return int(nearest)
    return int(math.ceil(x))


def _score_values(scores):
    if len(scores) and isinstance(scores[0], ConformityScore):
        return np.array([s.value for s in scores], dtype=float)
    return np.asarray(scores, dtype=float)


def calibrate_threshold(scores, alpha):
    """Length cutoff from calibration conformity scores.

    Parameters
    ----------
    scores : sequence of float or ConformityScore
        May contain +inf (out-of-range responses under the infinite
        boundary policy); those sort after every finite value.
    alpha : float
        Miscoverage level in (0, 1).

    Returns
    -------
    Threshold
        ``t`` is the rank-th smallest score, or +inf when the rank
        exceeds the number of scores (every interval is then kept).
    """
    values = _score_values(scores)
    if values.size == 0:
        raise ValueError("scores must be non-empty")
    if np.isnan(values).any():
        raise DataError("scores contain NaN")
    n = values.size
    rank = rank_index(n, alpha)
    if rank > n:
        t = np.inf
    else:
        t = float(np.sort(values)[rank - 1])
    return Threshold(t=t, rank=rank, n_cal=n, alpha=alpha)


def _components_from_selection(edges, selected):
    """Merge runs of adjacent selected intervals into closed components."""
    idx = np.flatnonzero(selected)
    comps = []
    if idx.size:
        breaks = np.flatnonzero(np.diff(idx) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [idx.size - 1]))
        for s, e in zip(starts, ends):
            lo = edges[idx[s]]
            hi = edges[idx[e] + 1]
            if hi > lo:  # (a, a] pieces are empty in measure and membership
                comps.append((lo, hi))
    if comps:
        arr = np.array(comps, dtype=float)
    else:
        arr = np.empty((0, 2))
    return PredictionSet(
        components=arr,
        size=float((arr[:, 1] - arr[:, 0]).sum()) if arr.size else 0.0,
        n_components=arr.shape[0],
    )


def _length_tolerance(edges):
    # absorbs re-computation dust when a literal cutoff equals a length
    # that the edge subtraction cannot represent exactly
    scale = float(np.max(np.abs(edges), initial=1.0))
    return 1e-12 * max(1.0, scale)


def predict_set(partition, threshold, fallback_shortest=False):
    """Union of all intervals no longer than the calibrated cutoff.

    Adjacent selected intervals merge into one component.  The result
    may be empty; with ``fallback_shortest`` an empty result is replaced
    by the single shortest positive-length interval.  Selection allows
    float dust of order 1e-12 relative to the edge scale, so a cutoff
    exactly equal to a length always selects that interval.

    Parameters
    ----------
    partition : IntervalPartition
    threshold : Threshold
    fallback_shortest : bool

    Returns
    -------
    PredictionSet
    """
    t = threshold.t if isinstance(threshold, Threshold) else float(threshold)
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    selected = partition.lengths <= t + _length_tolerance(partition.edges)
    pset = _components_from_selection(partition.edges, selected)
    if fallback_shortest and pset.n_components == 0:
        positive = partition.lengths > 0
        if positive.any():
            k = int(np.flatnonzero(positive)[np.argmin(partition.lengths[positive])])
            selected = np.zeros_like(positive)
            selected[k] = True
            pset = _components_from_selection(partition.edges, selected)
    return pset


def set_contains(pset, y):
    """Closed membership of ``y`` in a prediction set."""
    return pset.contains(y)


def split_conformal(model, X_cal, y_cal, X_test, alpha):
    """Split-conformal intervals around the model's median column.

    The absolute residual ``|y - median(x)|`` is calibrated to its
    rank-th smallest value ``Q`` and test intervals are ``median +- Q``.
    """
    y_cal = np.asarray(y_cal, dtype=float)
    med_idx = model.levels.nearest(0.5)
    residuals = np.abs(y_cal - model.predict_grid(X_cal)[:, med_idx])
    th = calibrate_threshold(residuals, alpha)
    med_test = model.predict_grid(X_test)[:, med_idx]
    return BaselineResult(
        method="split", lo=med_test - th.t, hi=med_test + th.t, q=th.t
    )


def cqr(model, X_cal, y_cal, X_test, alpha):
    """Conformalized quantile regression on the nearest grid levels.

    The target levels ``alpha/2`` and ``1 - alpha/2`` snap to the
    closest available grid levels (the snap distance is recorded on the
    result).  The signed score ``max(q_lo - y, y - q_hi)`` is calibrated
    and both endpoints are expanded by the resulting ``Q``.
    """
    y_cal = np.asarray(y_cal, dtype=float)
    lo_idx = model.levels.nearest(alpha / 2)
    hi_idx = model.levels.nearest(1 - alpha / 2)
    lo_level = float(model.levels.levels[lo_idx])
    hi_level = float(model.levels.levels[hi_idx])
    grid_cal = model.predict_grid(X_cal)
    scores = np.maximum(grid_cal[:, lo_idx] - y_cal, y_cal - grid_cal[:, hi_idx])
    n = scores.size
    rank = rank_index(n, alpha)
    q = np.inf if rank > n else float(np.sort(scores)[rank - 1])
    grid_test = model.predict_grid(X_test)
    snap = max(abs(lo_level - alpha / 2), abs(hi_level - (1 - alpha / 2)))
    return BaselineResult(
        method="cqr",
        lo=grid_test[:, lo_idx] - q,
        hi=grid_test[:, hi_idx] + q,
        q=q,
        snapped_levels=(lo_level, hi_level),
        snap_distance=snap,
    )


def harmonic_aggregate(score_a, score_b):
    """Harmonic mean of two non-negative conformity scores.

    Conventions: zero if either score is zero, +inf only when both are
    +inf; one finite score dominates an infinite partner
    (``H(v, inf) = 2v``).  Accepts scalars or arrays elementwise.
    """
    a = np.asarray(score_a, dtype=float)
    b = np.asarray(score_b, dtype=float)
    if (a < 0).any() or (b < 0).any():
        raise ValueError("scores must be non-negative")
    with np.errstate(divide="ignore"):
        out = 2.0 / (1.0 / a + 1.0 / b)
    if np.isscalar(score_a) and np.isscalar(score_b):
        return float(out)
    return out


def harmonic_batch_scores(edges_a, edges_b, y, policy="clamp"):
    """Harmonic-mean conformity scores from two models' grids.

    Each model contributes the length of its own interval covering the
    same response; the pair is combined with :func:`harmonic_aggregate`.

    Returns
    -------
    (values, clamped) : pair of ndarrays
        ``clamped`` flags rows where either model clamped.
    """
    va, ca = batch_scores(edges_a, y, policy)
    vb, cb = batch_scores(edges_b, y, policy)
    return harmonic_aggregate(va, vb), ca | cb


def harmonic_predict_set(part_a, part_b, threshold, policy="clamp"):
    """Prediction set thresholding the harmonic-mean score of two partitions.

    The two edge sets are overlaid into their common refinement; every
    refined cell scores the harmonic mean of the covering-interval
    lengths in each partition, and cells at or below the cutoff are
    merged into components exactly as in :func:`predict_set`.
    """
    t = threshold.t if isinstance(threshold, Threshold) else float(threshold)
    if t < 0:
        raise ValueError(f"threshold must be >= 0, got {t}")
    edges = np.union1d(part_a.edges, part_b.edges)
    if edges.size < 2:
        return PredictionSet(components=np.empty((0, 2)), size=0.0, n_components=0)
    mids = 0.5 * (edges[:-1] + edges[1:])
    sa, _ = scores_at(part_a, mids, policy)
    sb, _ = scores_at(part_b, mids, policy)
    selected = harmonic_aggregate(sa, sb) <= t + _length_tolerance(edges)
    return _components_from_selection(edges, selected)
