"""Coverage/size metrics, repetition aggregation, and length histograms.

Results aggregate into per-method reports carrying the per-repetition
coverage and mean set size, summarized as "mean (std)" with the
sample standard deviation.  The length histogram contrasts the
intervals that actually contained the responses against all intervals
the model produced; a negative mean difference is the signature of a
model whose short intervals attract the responses.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .conformal import PredictionSet
from .errors import DataError
from .intervals import batch_scores

__all__ = [
    "MethodReport",
    "LengthHistogram",
    "coverage",
    "mean_size",
    "length_histograms",
    "aggregate_reports",
    "write_report_csv",
    "write_histogram_csv",
]


def _contains_vector(sets, y):
    y = np.asarray(y, dtype=float)
    if len(sets) != y.shape[0]:
        raise ValueError(f"{len(sets)} sets but {y.shape[0]} responses")
    if len(sets) and isinstance(sets[0], PredictionSet):
        return np.array([s.contains(v) for s, v in zip(sets, y)])
    arr = np.asarray(sets, dtype=float)  # (n, 2) rows of [lo, hi]
    return (arr[:, 0] <= y) & (y <= arr[:, 1])


def coverage(sets, y_test):
    """Fraction of responses inside their prediction set.

    ``sets`` may be a list of :class:`PredictionSet`, an ``(n, 2)``
    array of interval endpoints, or a ``(lo, hi)`` pair of vectors.
    """
    y = np.asarray(y_test, dtype=float)
    if isinstance(sets, tuple) and len(sets) == 2 and np.ndim(sets[0]) == 1:
        lo, hi = sets
        if len(lo) != y.shape[0]:
            raise ValueError(f"{len(lo)} intervals but {y.shape[0]} responses")
        return float(np.mean((lo <= y) & (y <= hi)))
    return float(np.mean(_contains_vector(sets, y)))


def mean_size(sets):
    """Average Lebesgue size of the prediction sets."""
    if isinstance(sets, tuple) and len(sets) == 2 and np.ndim(sets[0]) == 1:
        lo, hi = sets
        sizes = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    elif len(sets) and isinstance(sets[0], PredictionSet):
        sizes = np.array([s.size for s in sets])
    else:
        arr = np.asarray(sets, dtype=float)
        if arr.size == 0:
            raise ValueError("sets must be non-empty")
        sizes = arr[:, 1] - arr[:, 0]
    if sizes.size == 0:
        raise ValueError("sets must be non-empty")
    return float(sizes.mean())


@dataclass(frozen=True)
class LengthHistogram:
    """Interval-length distributions: response-covering vs. all."""

    bin_edges: np.ndarray
    counts_response: np.ndarray
    counts_all: np.ndarray
    mean_difference: float  # mean(response lengths) - mean(all lengths)


def length_histograms(edge_matrix, responses, bins=50, policy="clamp"):
    """Histogram the covering-interval lengths against all lengths.

    Parameters
    ----------
    edge_matrix : ndarray of shape (n, K + 1)
        Quantile grids of the evaluated samples.
    responses : ndarray of shape (n,)
    bins : int
        Equal-width bins spanning the pooled length range.
    policy : str
        Boundary policy; under "infinite", out-of-range responses are
        excluded (an error if that empties the response population).
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    edges = np.asarray(edge_matrix, dtype=float)
    values, _ = batch_scores(edges, responses, policy)
    values = values[np.isfinite(values)]
    if values.size == 0:
        raise DataError("no in-range responses to histogram")
    all_lengths = np.diff(edges, axis=1).ravel()
    pooled_lo = min(values.min(), all_lengths.min())
    pooled_hi = max(values.max(), all_lengths.max())
    if pooled_hi == pooled_lo:
        pooled_hi = pooled_lo + 1.0  # degenerate: all lengths identical
    bin_edges = np.linspace(pooled_lo, pooled_hi, bins + 1)
    counts_response, _ = np.histogram(values, bins=bin_edges)
    counts_all, _ = np.histogram(all_lengths, bins=bin_edges)
    return LengthHistogram(
        bin_edges=bin_edges,
        counts_response=counts_response,
        counts_all=counts_all,
        mean_difference=float(values.mean() - all_lengths.mean()),
    )


@dataclass
class MethodReport:
    """Per-method metrics across repetitions."""

    method: str
    coverages: list = field(default_factory=list)
    sizes: list = field(default_factory=list)
    n_components: list = field(default_factory=list)  # CTI methods only
    clamp_rates: list = field(default_factory=list)

    @property
    def n_reps(self):
        return len(self.coverages)

    def add(self, cov, size, n_comp=None, clamp_rate=None):
        self.coverages.append(float(cov))
        self.sizes.append(float(size))
        if n_comp is not None:
            self.n_components.append(float(n_comp))
        if clamp_rate is not None:
            self.clamp_rates.append(float(clamp_rate))

    def metrics(self):
        """Ordered mapping of metric name to per-repetition values."""
        out = {"coverage": self.coverages, "size": self.sizes}
        if self.n_components:
            out["n_components"] = self.n_components
        if self.clamp_rates:
            out["clamp_rate"] = self.clamp_rates
        return out


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0  # single repetition: std reported as 0
    return float(arr.mean()), float(arr.std(ddof=1))


def aggregate_reports(report):
    """Summarize one method report as ``metric -> (mean, std, "m (s)")``."""
    if report.n_reps < 1:
        raise ValueError("report has no repetitions")
    out = {}
    for name, values in report.metrics().items():
        mean, std = _mean_std(values)
        out[name] = (mean, std, f"{mean:.3f} ({std:.3f})")
    return out


def write_report_csv(path, dataset_name, reports):
    """Write the summary table: dataset,method,metric,mean,std,n_reps."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "metric", "mean", "std", "n_reps"])
        for report in reports:
            summary = aggregate_reports(report)
            for metric, (mean, std, _) in summary.items():
                writer.writerow(
                    [dataset_name, report.method, metric, f"{mean:.6f}", f"{std:.6f}", report.n_reps]
                )


def write_histogram_csv(path, histogram):
    """Write one length histogram: bin_lo,bin_hi,count_response,count_all."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "count_response", "count_all"])
        for i in range(histogram.counts_all.size):
            writer.writerow(
                [
                    f"{histogram.bin_edges[i]:.6f}",
                    f"{histogram.bin_edges[i + 1]:.6f}",
                    int(histogram.counts_response[i]),
                    int(histogram.counts_all[i]),
                ]
            )
