"""Multi-output conditional quantile estimation.

Every model in this module maps a feature matrix to a grid of
``n_intervals + 1`` non-crossing quantile estimates per row, covering
equispaced probability levels between two clipped extremes (0.001 and
0.999 by default).  The grid is the only thing downstream code consumes:
interval construction, calibration and set prediction never look inside
a model.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .errors import DataError, FitError, FormatError

__all__ = [
    "QuantileLevels",
    "PinballConfig",
    "ForestConfig",
    "pinball_loss",
    "enforce_monotone",
    "QuantileModel",
    "JointQuantileNetwork",
    "QuantileForest",
    "FunctionQuantileModel",
    "load_external_grids",
]


@dataclass(frozen=True)
class QuantileLevels:
    """Equispaced probability levels for a quantile grid.

    ``n_intervals`` adjacent level pairs delimit the interquantile
    intervals; the grid therefore has ``n_intervals + 1`` levels running
    from ``tau_min`` to ``tau_max`` in equal steps.

    Parameters
    ----------
    n_intervals : int
        Number of interquantile intervals (at least 1).
    tau_min, tau_max : float
        Clipped extreme levels standing in for 0 and 1, since most
        quantile regressors cannot target the exact endpoints.
    """

    n_intervals: int
    tau_min: float = 0.001
    tau_max: float = 0.999
    levels: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_intervals < 1:
            raise ValueError(f"n_intervals must be >= 1, got {self.n_intervals}")
        if not 0.0 < self.tau_min < self.tau_max < 1.0:
            raise ValueError(
                f"need 0 < tau_min < tau_max < 1, got ({self.tau_min}, {self.tau_max})"
            )
        levels = np.linspace(self.tau_min, self.tau_max, self.n_intervals + 1)
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return self.n_intervals + 1

    def nearest(self, tau):
        """Index of the grid level closest to ``tau``."""
        return int(np.argmin(np.abs(self.levels - tau)))


def pinball_loss(residual, tau):
    """Check-function loss for quantile regression.

    Parameters
    ----------
    residual : float or ndarray
        ``y - prediction``.
    tau : float
        Target quantile level, strictly inside (0, 1).

    Returns
    -------
    float or ndarray
        ``tau * r`` where ``r > 0``, else ``-(1 - tau) * r``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    r = np.asarray(residual, dtype=float)
    out = np.where(r > 0, tau * r, -(1.0 - tau) * r) + 0.0  # normalize -0.0
    return float(out) if np.isscalar(residual) else out


def enforce_monotone(raw):
    """Repair quantile crossing by ascending rearrangement.

    Sorting each grid is idempotent, preserves the multiset of values and
    keeps the empirical-CDF reading of the levels intact.

    Parameters
    ----------
    raw : array-like
        A single grid ``(m,)`` or a batch ``(n, m)``.

    Returns
    -------
    ndarray
        Sorted copy along the last axis.
    """
    arr = np.asarray(raw, dtype=float)
    if np.isnan(arr).any():
        raise DataError("quantile grid contains NaN")
    return np.sort(arr, axis=-1)


@dataclass
class PinballConfig:
    """Hyperparameters for :class:`JointQuantileNetwork`."""

    hidden: tuple = (64,)
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int | None = None  # None = full batch
    seed: int = 0

    def __post_init__(self):
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class ForestConfig:
    """Hyperparameters for :class:`QuantileForest`."""

    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 5
    max_features_frac: float = 1.0
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if not 0.0 < self.max_features_frac <= 1.0:
            raise ValueError("max_features_frac must be in (0, 1]")


class QuantileModel:
    """Base class: a fitted multi-output quantile estimator.

    Subclasses set ``kind`` and implement :meth:`_raw_grid`.  Prediction
    always passes through :func:`enforce_monotone`, so delivered grids
    are non-crossing by construction.
    """

    kind = "abstract"

    def __init__(self, levels: QuantileLevels):
        self.levels = levels
        self.n_features_ = None

    def _raw_grid(self, X):
        raise NotImplementedError

    def _check_X(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]  # same reading as fit: n samples of one feature
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if self.n_features_ is not None and X.shape[1] != self.n_features_:
            raise ValueError(
                f"X has {X.shape[1]} features, model was trained with {self.n_features_}"
            )
        return X

    def predict_grid(self, X):
        """Monotone quantile grid for each row of ``X``.

        Returns
        -------
        ndarray of shape (n, n_intervals + 1)
        """
        X = self._check_X(X)
        return enforce_monotone(self._raw_grid(X))


class JointQuantileNetwork(QuantileModel):
    """Relu network trained on the summed pinball loss, all levels jointly.

    All levels share the hidden representation; the loss is the mean
    over samples and levels of ``pinball_loss(y - output_k, tau_k)``.
    Optimization is full-batch Adam (minibatches when ``batch_size`` is
    set), which keeps the small default learning rate workable for
    extreme levels where raw pinball gradients are nearly flat.
    Features and response are standardized internally and the output
    layer starts at zero, so every level begins at the response mean;
    predictions are returned in response units.
    """

    kind = "pinball-joint"

    def __init__(self, levels: QuantileLevels, config: PinballConfig | None = None):
        super().__init__(levels)
        self.config = config or PinballConfig()
        self.history_ = None

    def fit(self, X, y):
        """Fit the network. Deterministic for a fixed config seed."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] == 0:
            raise DataError("training set is empty")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("training data contains non-finite values")

        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        n, d = X.shape
        taus = self.levels.levels

        self._x_mean = X.mean(axis=0)
        self._x_scale = X.std(axis=0)
        self._x_scale[self._x_scale == 0] = 1.0
        self._y_mean = y.mean()
        self._y_scale = y.std()
        if self._y_scale == 0:
            self._y_scale = 1.0
        Xs = (X - self._x_mean) / self._x_scale
        ys = (y - self._y_mean) / self._y_scale

        sizes = [d, *cfg.hidden, len(taus)]
        weights = [
            rng.normal(0.0, 1.0 / np.sqrt(sizes[i]), size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ]
        weights[-1][:] = 0.0  # start every level at the response mean
        biases = [np.zeros(s) for s in sizes[1:]]

        params = weights + biases
        m_adam = [np.zeros_like(p) for p in params]
        v_adam = [np.zeros_like(p) for p in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        step = 0

        def forward(xb):
            acts = [xb]
            h = xb
            for w, b in zip(weights[:-1], biases[:-1]):
                h = np.maximum(h @ w + b, 0.0)
                acts.append(h)
            out = h @ weights[-1] + biases[-1]
            return acts, out

        def backward(acts, out, yb):
            nb = out.shape[0]
            r = yb[:, None] - out
            # dL/d out; zero subgradient at the kink keeps exact fits parked
            g_out = np.where(r > 0, -taus, np.where(r < 0, 1.0 - taus, 0.0))
            g_out = g_out / (nb * len(taus))
            grads_w = [None] * len(weights)
            grads_b = [None] * len(biases)
            delta = g_out
            for layer in range(len(weights) - 1, -1, -1):
                grads_w[layer] = acts[layer].T @ delta
                grads_b[layer] = delta.sum(axis=0)
                if layer > 0:
                    delta = (delta @ weights[layer].T) * (acts[layer] > 0)
            return grads_w + grads_b

        batch = cfg.batch_size if cfg.batch_size is not None else n
        batch = min(batch, n)
        history = []
        for _ in range(cfg.epochs):
            if batch == n:
                order = np.arange(n)
            else:
                order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                acts, out = forward(Xs[idx])
                r = ys[idx][:, None] - out
                epoch_loss += float(
                    np.where(r > 0, taus * r, -(1.0 - taus) * r).sum()
                )
                grads = backward(acts, out, ys[idx])
                step += 1
                for p, g, m, v in zip(params, grads, m_adam, v_adam):
                    m *= beta1
                    m += (1 - beta1) * g
                    v *= beta2
                    v += (1 - beta2) * g * g
                    mhat = m / (1 - beta1**step)
                    vhat = v / (1 - beta2**step)
                    p -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
            history.append(epoch_loss / (n * len(taus)))

        self._weights = weights
        self._biases = biases
        self.history_ = np.array(history)
        self.n_features_ = d
        return self

    def _raw_grid(self, X):
        if self.n_features_ is None:
            raise FitError("model is not fitted")
        h = (X - self._x_mean) / self._x_scale
        for w, b in zip(self._weights[:-1], self._biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        out = h @ self._weights[-1] + self._biases[-1]
        return out * self._y_scale + self._y_mean


class QuantileForest(QuantileModel):
    """Random forest with quantiles read from leaf-weighted responses.

    Trees are grown by scikit-learn as ordinary regression trees; at
    prediction time every training response is weighted by
    ``mean over trees of 1{same leaf as x} / leaf size`` and quantiles
    are read from the weighted empirical CDF using the "higher" rule
    (smallest response whose cumulative weight reaches the level), so no
    mass is invented between observed responses.
    """

    kind = "forest"

    def __init__(self, levels: QuantileLevels, config: ForestConfig | None = None):
        super().__init__(levels)
        self.config = config or ForestConfig()

    def fit(self, X, y):
        """Grow the forest and index training responses by leaf."""
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] == 0:
            raise DataError("training set is empty")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise DataError("training data contains non-finite values")
        cfg = self.config
        if X.shape[0] < cfg.min_leaf:
            raise FitError(
                f"need at least min_leaf={cfg.min_leaf} samples, got {X.shape[0]}"
            )

        self._rf = RandomForestRegressor(
            n_estimators=cfg.n_trees,
            max_depth=cfg.max_depth,
            min_samples_leaf=cfg.min_leaf,
            max_features=cfg.max_features_frac,
            random_state=cfg.seed,
            bootstrap=True,
            n_jobs=cfg.n_jobs,
        )
        self._rf.fit(X, y)

        order = np.argsort(y, kind="stable")
        self._y_sorted = y[order]
        leaves = self._rf.apply(X)  # (n, n_trees)
        # per tree: training rows grouped by leaf id, positions given in
        # sorted-response order so weight gathering lands pre-sorted
        self._tree_sorted_leaves = []
        self._tree_row_order = []
        for t in range(leaves.shape[1]):
            lt = leaves[order, t]
            by_leaf = np.argsort(lt, kind="stable")
            self._tree_sorted_leaves.append(lt[by_leaf])
            self._tree_row_order.append(by_leaf)
        self.n_features_ = X.shape[1]
        return self

    def _leaf_weights(self, X):
        """Normalized response weights, shape (len(X), n_train)."""
        n_train = self._y_sorted.shape[0]
        leaves = self._rf.apply(X)
        W = np.zeros((X.shape[0], n_train))
        m = X.shape[0]
        rows_base = np.arange(m)
        for t in range(leaves.shape[1]):
            slt = self._tree_sorted_leaves[t]
            lo = np.searchsorted(slt, leaves[:, t], side="left")
            hi = np.searchsorted(slt, leaves[:, t], side="right")
            sizes = hi - lo
            total = int(sizes.sum())
            starts = np.repeat(lo, sizes)
            offsets = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
            cols = self._tree_row_order[t][starts + offsets]
            rows = np.repeat(rows_base, sizes)
            W[rows, cols] += np.repeat(1.0 / sizes, sizes)
        return W / W.sum(axis=1, keepdims=True)

    def predict_quantiles(self, X, taus, chunk=1024):
        """Weighted empirical quantiles at arbitrary levels.

        Parameters
        ----------
        X : ndarray of shape (n, d)
        taus : array-like of levels in (0, 1)
        chunk : int
            Rows processed per weight block, bounds peak memory.

        Returns
        -------
        ndarray of shape (n, len(taus))
        """
        if self.n_features_ is None:
            raise FitError("model is not fitted")
        X = self._check_X(X)
        taus = np.asarray(taus, dtype=float)
        out = np.empty((X.shape[0], taus.size))
        n_train = self._y_sorted.shape[0]
        for start in range(0, X.shape[0], chunk):
            block = X[start : start + chunk]
            W = self._leaf_weights(block)
            cw = np.cumsum(W, axis=1)
            for i in range(block.shape[0]):
                idx = np.searchsorted(cw[i], taus * cw[i, -1], side="left")
                out[start + i] = self._y_sorted[np.minimum(idx, n_train - 1)]
        return out

    def _raw_grid(self, X):
        return self.predict_quantiles(X, self.levels.levels)


class FunctionQuantileModel(QuantileModel):
    """Externally supplied quantile function wrapped as a model.

    Useful for injecting analytically known conditional quantiles into
    the calibration/prediction pipeline, or any estimator trained
    outside this package.

    Parameters
    ----------
    levels : QuantileLevels
    quantile_fn : callable
        ``quantile_fn(X, taus) -> (len(X), len(taus))`` array of
        conditional quantiles.
    n_features : int
        Trained feature dimensionality enforced at prediction time.
    """

    kind = "external"

    def __init__(self, levels: QuantileLevels, quantile_fn, n_features):
        super().__init__(levels)
        self._fn = quantile_fn
        self.n_features_ = int(n_features)

    def _raw_grid(self, X):
        out = np.asarray(self._fn(X, self.levels.levels), dtype=float)
        expected = (X.shape[0], len(self.levels))
        if out.shape != expected:
            raise ValueError(f"quantile_fn returned shape {out.shape}, expected {expected}")
        return out


def load_external_grids(path, n_intervals):
    """Read a quantile-grid interchange file.

    The file is CSV with header ``id,q0,q1,...,qK`` (``K = n_intervals``),
    one row per sample, '.' decimal separator.  Crossing rows are
    repaired by :func:`enforce_monotone`.

    Returns
    -------
    dict mapping row id (str) to ndarray of shape (n_intervals + 1,)
    """
    expected_cols = n_intervals + 2
    grids = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) != expected_cols:
            raise FormatError(
                f"{path}: header has {len(header)} columns, expected {expected_cols} "
                f"(id plus {n_intervals + 1} quantiles)"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != expected_cols:
                raise FormatError(
                    f"{path}:{lineno}: {len(row)} columns, expected {expected_cols}"
                )
            try:
                values = np.array([float(v) for v in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric quantile cell") from exc
            grids[row[0]] = enforce_monotone(values)
    return grids
