"""Synthetic scenarios with analytically known conditional densities.

Each scenario couples a one-dimensional feature drawn uniformly from
``[0, 1]`` with a conditional response law whose density, CDF and
quantile function are available in closed form (or by monotone
inversion).  On top of these the module computes the density-level-set
benchmark: the marginal density threshold reaching a target coverage
and the level-set slices ``{y : f(y|x) >= t}``, which are the smallest
possible prediction sets and therefore the yardstick for any conformal
method's efficiency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import NumericError
from .quantile import FunctionQuantileModel, QuantileLevels

__all__ = [
    "Scenario",
    "HeteroGauss",
    "Bimodal",
    "LogNormal",
    "Uniform",
    "SCENARIOS",
    "make_scenario",
    "generate",
    "true_density",
    "true_quantiles",
    "oracle_quantile_model",
    "oracle_threshold",
    "oracle_set",
    "oracle_expected_length",
    "OracleSet",
    "lipschitz_bound",
]

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _match_x_shape(out, x, y):
    """Broadcast a y-shaped result of a feature-free law to (x, y) shape."""
    shape = np.broadcast_shapes(np.shape(x), np.shape(y))
    if shape == ():
        return float(out)
    return np.broadcast_to(out, shape).copy() if np.shape(out) != shape else out


class Scenario:
    """Feature/response law with closed-form conditional structure.

    Subclasses implement ``density``, ``cdf``, ``quantile``,
    ``sample_y`` and ``support``; the feature is always U(0, 1).
    """

    name = "abstract"

    def sample_x(self, n, rng):
        return rng.uniform(0.0, 1.0, size=n)

    def sample_y(self, x, rng):
        raise NotImplementedError

    def density(self, x, y):
        """Conditional density f(y|x), broadcasting over inputs."""
        raise NotImplementedError

    def cdf(self, x, y):
        raise NotImplementedError

    def quantile(self, x, taus):
        """Conditional quantiles, shape (len(x), len(taus))."""
        raise NotImplementedError

    def support(self, x):
        """Window [lo, hi] carrying all but negligible conditional mass."""
        raise NotImplementedError


@dataclass
class HeteroGauss(Scenario):
    """Gaussian response with affine mean and standard deviation.

    ``Y | X = x ~ N(mean0 + mean1 * x, (sd0 + sd1 * x)^2)``; the default
    has variance growing with the feature, the canonical
    heteroscedastic test bed.  ``sd0 + sd1 * x`` must stay positive on
    [0, 1].
    """

    mean0: float = 0.0
    mean1: float = 2.0
    sd0: float = 1.0
    sd1: float = 1.0

    name = "hetero-gauss"

    def __post_init__(self):
        if self.sd0 <= 0 or self.sd0 + self.sd1 <= 0:
            raise ValueError("sd must be positive on [0, 1]")

    def _mu(self, x):
        return self.mean0 + self.mean1 * np.asarray(x, dtype=float)

    def _sigma(self, x):
        return self.sd0 + self.sd1 * np.asarray(x, dtype=float)

    def sample_y(self, x, rng):
        x = np.asarray(x, dtype=float)
        return self._mu(x) + self._sigma(x) * rng.standard_normal(x.shape)

    def density(self, x, y):
        s = self._sigma(x)
        return _phi((np.asarray(y, dtype=float) - self._mu(x)) / s) / s

    def cdf(self, x, y):
        return ndtr((np.asarray(y, dtype=float) - self._mu(x)) / self._sigma(x))

    def quantile(self, x, taus):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = ndtri(np.asarray(taus, dtype=float))
        return self._mu(x)[:, None] + self._sigma(x)[:, None] * z[None, :]

    def support(self, x):
        mu, s = float(self._mu(x)), float(self._sigma(x))
        return mu - 6.0 * s, mu + 6.0 * s


@dataclass
class Bimodal(Scenario):
    """Two-component Gaussian mixture, independent of the feature.

    Default modes at -3 and +3 with sd 0.5 leave a deep density valley
    around zero, so optimal prediction sets are two disjoint pieces.
    """

    mode_lo: float = -3.0
    mode_hi: float = 3.0
    sd: float = 0.5
    weight: float = 0.5  # mass on the low mode

    name = "bimodal"

    def __post_init__(self):
        if self.sd <= 0:
            raise ValueError("sd must be positive")
        if not 0.0 < self.weight < 1.0:
            raise ValueError("weight must be in (0, 1)")

    def sample_y(self, x, rng):
        x = np.asarray(x, dtype=float)
        pick_lo = rng.uniform(size=x.shape) < self.weight
        centers = np.where(pick_lo, self.mode_lo, self.mode_hi)
        return centers + self.sd * rng.standard_normal(x.shape)

    def density(self, x, y):
        y = np.asarray(y, dtype=float)
        w, s = self.weight, self.sd
        out = w * _phi((y - self.mode_lo) / s) / s
        out = out + (1.0 - w) * _phi((y - self.mode_hi) / s) / s
        return _match_x_shape(out, x, y)

    def cdf(self, x, y):
        y = np.asarray(y, dtype=float)
        w, s = self.weight, self.sd
        return w * ndtr((y - self.mode_lo) / s) + (1.0 - w) * ndtr((y - self.mode_hi) / s)

    def quantile(self, x, taus):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        taus = np.asarray(taus, dtype=float)
        lo = self.mode_lo - 8.0 * self.sd
        hi = self.mode_hi + 8.0 * self.sd
        a = np.full(taus.shape, lo)
        b = np.full(taus.shape, hi)
        for _ in range(80):  # monotone bisection on the mixture CDF
            mid = 0.5 * (a + b)
            below = self.cdf(0.0, mid) < taus
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        q = 0.5 * (a + b)
        return np.tile(q, (x.shape[0], 1))

    def support(self, x):
        return self.mode_lo - 6.0 * self.sd, self.mode_hi + 6.0 * self.sd


@dataclass
class LogNormal(Scenario):
    """Log-normal response with affine log-scale location.

    ``log Y | X = x ~ N(loc0 + loc1 * x, log_sd^2)``: right-skewed, so
    equal-tailed intervals are visibly longer than level sets.
    """

    loc0: float = 0.0
    loc1: float = 1.0
    log_sd: float = 0.5

    name = "lognormal"

    def __post_init__(self):
        if self.log_sd <= 0:
            raise ValueError("log_sd must be positive")

    def _loc(self, x):
        return self.loc0 + self.loc1 * np.asarray(x, dtype=float)

    def sample_y(self, x, rng):
        x = np.asarray(x, dtype=float)
        return np.exp(self._loc(x) + self.log_sd * rng.standard_normal(x.shape))

    def density(self, x, y):
        y = np.asarray(y, dtype=float)
        loc = self._loc(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(y > 0, y, np.nan)) - loc) / self.log_sd
            out = _phi(z) / (y * self.log_sd)
        return np.where(y > 0, out, 0.0)

    def cdf(self, x, y):
        y = np.asarray(y, dtype=float)
        loc = self._loc(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(y > 0, y, np.nan)) - loc) / self.log_sd
        return np.where(y > 0, ndtr(z), 0.0)

    def quantile(self, x, taus):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = ndtri(np.asarray(taus, dtype=float))
        return np.exp(self._loc(x)[:, None] + self.log_sd * z[None, :])

    def support(self, x):
        loc = float(self._loc(x))
        return float(np.exp(loc - 6.0 * self.log_sd)), float(np.exp(loc + 6.0 * self.log_sd))


@dataclass
class Uniform(Scenario):
    """Flat response on a fixed interval, independent of the feature.

    The degenerate case for level sets: every threshold at or below the
    constant density needs the whole support.
    """

    low: float = 0.0
    high: float = 1.0

    name = "uniform"

    def __post_init__(self):
        if self.high <= self.low:
            raise ValueError("need high > low")

    def sample_y(self, x, rng):
        x = np.asarray(x, dtype=float)
        return rng.uniform(self.low, self.high, size=x.shape)

    def density(self, x, y):
        y = np.asarray(y, dtype=float)
        inside = (y >= self.low) & (y <= self.high)
        out = np.where(inside, 1.0 / (self.high - self.low), 0.0)
        return _match_x_shape(out, x, y)

    def cdf(self, x, y):
        y = np.asarray(y, dtype=float)
        return np.clip((y - self.low) / (self.high - self.low), 0.0, 1.0)

    def quantile(self, x, taus):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        taus = np.asarray(taus, dtype=float)
        q = self.low + taus * (self.high - self.low)
        return np.tile(q, (x.shape[0], 1))

    def support(self, x):
        return self.low, self.high


SCENARIOS = {
    "hetero-gauss": HeteroGauss,
    "bimodal": Bimodal,
    "lognormal": LogNormal,
    "uniform": Uniform,
}


def make_scenario(name, **params):
    """Instantiate a scenario family by name."""
    try:
        cls = SCENARIOS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}, expected one of {sorted(SCENARIOS)}"
        ) from None
    return cls(**params)


def generate(scenario, n, seed):
    """Draw ``n`` iid (x, y) pairs; deterministic per seed.

    Returns
    -------
    (X, y) : ndarray (n, 1), ndarray (n,)
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x = scenario.sample_x(n, rng)
    y = scenario.sample_y(x, rng)
    return x[:, None], y


def true_density(scenario, x, y):
    """Exact conditional density value(s)."""
    return scenario.density(x, y)


def true_quantiles(scenario, X, taus):
    """Conditional quantiles for feature rows, shape (n, len(taus))."""
    X = np.asarray(X, dtype=float)
    x = X[:, 0] if X.ndim == 2 else X
    return scenario.quantile(x, taus)


def oracle_quantile_model(scenario, levels: QuantileLevels):
    """The scenario's exact quantile function wrapped as an external model."""
    return FunctionQuantileModel(
        levels, lambda X, taus: true_quantiles(scenario, X, taus), n_features=1
    )


def oracle_threshold(scenario, alpha, mc_n=100_000, seed=0, max_iter=100):
    """Marginal density threshold whose super-level sets cover 1 - alpha.

    Bisects the Monte-Carlo estimate of ``P(f(Y|X) >= t)`` down to a
    bracket narrower than ``1e-4 * max density``; returns the lower
    bracket end, the largest verified threshold still covering.

    Parameters
    ----------
    scenario : Scenario
    alpha : float
    mc_n : int
        Monte-Carlo sample size, at least 10**4.
    seed : int
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if mc_n < 10_000:
        raise ValueError(f"mc_n must be >= 10000, got {mc_n}")
    rng = np.random.default_rng(seed)
    x = scenario.sample_x(mc_n, rng)
    y = scenario.sample_y(x, rng)
    dens = scenario.density(x, y)
    d_max = float(dens.max())
    target = 1.0 - alpha

    if np.mean(dens >= d_max) >= target:
        return d_max  # flat density: the whole support is needed
    lo, hi = 0.0, d_max
    tol = 1e-4 * d_max
    for _ in range(max_iter):
        if hi - lo < tol:
            return lo
        mid = 0.5 * (lo + hi)
        if np.mean(dens >= mid) >= target:
            lo = mid
        else:
            hi = mid
    raise NumericError(f"threshold bisection did not converge in {max_iter} iterations")


def _level_slices(scenario, x, t_prime, n_grid):
    lo, hi = scenario.support(x)
    ys = np.linspace(lo, hi, n_grid)
    dens = np.asarray(scenario.density(x, ys), dtype=float)
    mask = dens >= t_prime
    if not mask.any():
        return []
    refine_tol = (hi - lo) * 1e-10

    def crossing(y_a, y_b):
        f = lambda yy: float(scenario.density(x, yy)) - t_prime
        fa, fb = f(y_a), f(y_b)
        if fa == 0.0:
            return y_a
        if fb == 0.0:
            return y_b
        return brentq(f, y_a, y_b, xtol=refine_tol)

    comps = []
    idx = np.flatnonzero(mask)
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    for s, e in zip(starts, ends):
        i0, i1 = idx[s], idx[e]
        left = ys[i0] if i0 == 0 else crossing(ys[i0 - 1], ys[i0])
        right = ys[i1] if i1 == n_grid - 1 else crossing(ys[i1], ys[i1 + 1])
        comps.append((float(left), float(right)))
    return comps


def oracle_set(scenario, x, t_prime, n_grid=2048):
    """Slices of the conditional super-level set ``{y : f(y|x) >= t'}``.

    Grid scan over the 6-sd support window followed by bisection
    refinement of each density crossing.

    Returns
    -------
    list of (lo, hi) tuples, possibly empty
    """
    if n_grid < 8:
        raise NumericError(f"n_grid={n_grid} too coarse to bracket crossings")
    comps = _level_slices(scenario, x, t_prime, n_grid)
    if not comps:
        # retry denser before declaring the set empty: a spike narrower
        # than the grid pitch would otherwise be silently dropped
        comps = _level_slices(scenario, x, t_prime, 4 * n_grid)
    return comps


@dataclass(frozen=True)
class OracleSet:
    """Monte-Carlo summary of level-set size at a fixed threshold."""

    threshold: float
    expected_length: float
    mc_se: float
    n_x: int


def oracle_expected_length(scenario, t_prime, n_x=2000, seed=0, n_grid=2048):
    """Average level-set length over sampled features.

    Returns
    -------
    OracleSet with the Monte-Carlo standard error of the mean.
    """
    rng = np.random.default_rng(seed)
    xs = scenario.sample_x(n_x, rng)
    lengths = np.empty(n_x)
    for i, x in enumerate(xs):
        comps = oracle_set(scenario, float(x), t_prime, n_grid=n_grid)
        lengths[i] = sum(hi - lo for lo, hi in comps)
    return OracleSet(
        threshold=float(t_prime),
        expected_length=float(lengths.mean()),
        mc_se=float(lengths.std(ddof=1) / np.sqrt(n_x)),
        n_x=n_x,
    )


def lipschitz_bound(a, b, mass, lipschitz):
    """Pointwise band for an L-Lipschitz function from its integral.

    If ``f`` has Lipschitz constant ``L`` and integrates to ``mass``
    over ``[a, b]``, then everywhere on the interval
    ``mass/(b-a) - L(b-a)/2 <= f <= mass/(b-a) + L(b-a)/2``.

    Returns
    -------
    (lower, upper) : tuple of floats
    """
    if b <= a:
        raise ValueError(f"need b > a, got [{a}, {b}]")
    if lipschitz < 0:
        raise ValueError(f"Lipschitz constant must be >= 0, got {lipschitz}")
    center = mass / (b - a)
    half = lipschitz * (b - a) / 2.0
    return center - half, center + half
