"""Dataset ingestion, the train/calibration/test split, and response scaling.

The split protocol holds out 20% of the rows for testing, then uses 70%
of the remainder for training and the rest for calibration.  Response
standardization statistics come from the non-test rows only, so nothing
about the test responses can leak into model fitting or calibration.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError, FormatError

__all__ = ["Dataset", "DataSplit", "Standardizer", "load_csv", "split_indices", "standardize"]

TEST_FRACTION = 0.2
TRAIN_FRACTION = 0.7  # of the non-test rows


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix plus response vector."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    provenance: str

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/calibration/test index sets for one repetition."""

    train: np.ndarray
    cal: np.ndarray
    test: np.ndarray
    seed: int
    fractions: tuple = (TRAIN_FRACTION, TEST_FRACTION)  # (train-of-non-test, test)

    @property
    def non_test(self):
        return np.concatenate([self.train, self.cal])


@dataclass(frozen=True)
class Standardizer:
    """Affine response transform fitted on non-test rows."""

    mean: float
    std: float

    def transform(self, y):
        return (np.asarray(y, dtype=float) - self.mean) / self.std

    def inverse(self, y):
        return np.asarray(y, dtype=float) * self.std + self.mean


def load_csv(path, response_column):
    """Load a numeric CSV dataset.

    Rows containing missing values are dropped with a warning.  Columns
    that fail numeric parsing raise :class:`FormatError` naming the
    column.  Loading itself accepts any row count; the split protocol
    requires at least 10 rows.

    Parameters
    ----------
    path : str or Path
    response_column : str
        Header name of the response.

    Returns
    -------
    Dataset
    """
    frame = pd.read_csv(path)
    if response_column not in frame.columns:
        raise FormatError(
            f"{path}: response column {response_column!r} not found "
            f"(columns: {list(frame.columns)})"
        )
    bad = []
    for col in frame.columns:
        coerced = pd.to_numeric(frame[col], errors="coerce")
        # non-numeric cells become NaN; distinguish them from true blanks
        if coerced.isna().sum() > frame[col].isna().sum():
            bad.append(str(col))
        frame[col] = coerced
    if bad:
        raise FormatError(f"{path}: non-numeric values in column(s) {bad}")

    n_raw = len(frame)
    frame = frame.dropna()
    dropped = n_raw - len(frame)
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) with missing values", stacklevel=2)
    if len(frame) == 0:
        raise DataError(f"{path}: no complete rows after dropping missing values")

    y = frame[response_column].to_numpy(dtype=float)
    features = frame.drop(columns=[response_column])
    return Dataset(
        X=features.to_numpy(dtype=float),
        y=y,
        feature_names=tuple(str(c) for c in features.columns),
        provenance=str(path),
    )


def split_indices(n, seed):
    """Seeded random train/calibration/test split of ``range(n)``.

    ``round(0.2 n)`` rows are held out for testing and
    ``round(0.7 (n - n_test))`` of the remainder train the model;
    everything else calibrates.  Depends only on ``n`` and ``seed``,
    never on data values, so exchangeability is preserved.
    """
    if n < 10:
        raise ValueError(f"need n >= 10 to split, got {n}")
    n_test = round(TEST_FRACTION * n)
    n_train = round(TRAIN_FRACTION * (n - n_test))
    perm = np.random.default_rng(seed).permutation(n)
    return DataSplit(
        train=perm[:n_train],
        cal=perm[n_train : n - n_test],
        test=perm[n - n_test :],
        seed=seed,
    )


def standardize(dataset, data_split):
    """Standardize the response using non-test statistics.

    Returns
    -------
    (Dataset, Standardizer)
        A copy of the dataset with transformed ``y`` and the fitted
        transform for reporting in raw units.
    """
    y_fit = dataset.y[data_split.non_test]
    mean = float(y_fit.mean())
    std = float(y_fit.std())
    if std == 0:
        raise DataError("response has zero variance on the train+calibration rows")
    scaler = Standardizer(mean=mean, std=std)
    scaled = Dataset(
        X=dataset.X,
        y=scaler.transform(dataset.y),
        feature_names=dataset.feature_names,
        provenance=dataset.provenance,
    )
    return scaled, scaler
