"""Tests for scenarios, level-set oracles, and the Lipschitz band."""

import numpy as np
import pytest
from scipy.integrate import simpson
from scipy.stats import norm

from cti import (
    Bimodal,
    HeteroGauss,
    LogNormal,
    QuantileLevels,
    Uniform,
    batch_scores,
    calibrate_threshold,
    generate,
    lipschitz_bound,
    make_scenario,
    oracle_expected_length,
    oracle_quantile_model,
    oracle_set,
    oracle_threshold,
    true_density,
    true_quantiles,
)

STANDARD_NORMAL = HeteroGauss(mean0=0.0, mean1=0.0, sd0=1.0, sd1=0.0)


def _scenarios():
    return [HeteroGauss(), Bimodal(), LogNormal(), Uniform()]


class TestScenarios:
    def test_density_normalizes(self):
        for sc in _scenarios():
            for x in [0.0, 0.3, 1.0]:
                lo, hi = sc.support(x)
                ys = np.linspace(lo, hi, 8193)
                total = simpson(sc.density(x, ys), x=ys)
                assert abs(total - 1.0) <= 1e-6, f"{sc.name} at x={x}: {total}"

    def test_cdf_matches_density_integral(self):
        for sc in _scenarios():
            lo, hi = sc.support(0.5)
            ys = np.linspace(lo, hi, 4097)
            dens = sc.density(0.5, ys)
            cdf_num = np.concatenate(
                ([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(ys)))
            )
            cdf_num += sc.cdf(0.5, lo)
            np.testing.assert_allclose(sc.cdf(0.5, ys), cdf_num, atol=5e-4)

    def test_quantile_inverts_cdf(self):
        taus = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
        for sc in _scenarios():
            q = sc.quantile(np.array([0.4]), taus)[0]
            np.testing.assert_allclose(sc.cdf(0.4, q), taus, atol=1e-6)

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            make_scenario("cauchy")

    def test_make_scenario_with_params(self):
        sc = make_scenario("bimodal", sd=0.25)
        assert sc.sd == 0.25


class TestGenerate:
    def test_reproducible(self):
        sc = Uniform()
        X1, y1 = generate(sc, 3, seed=99)
        X2, y2 = generate(sc, 3, seed=99)
        assert X1.shape == (3, 1)
        np.testing.assert_array_equal(X1, X2)
        np.testing.assert_array_equal(y1, y2)

    def test_different_seeds_differ(self):
        sc = Uniform()
        _, y1 = generate(sc, 100, seed=1)
        _, y2 = generate(sc, 100, seed=2)
        assert not np.array_equal(y1, y2)

    def test_heteroscedastic_bucket_variance(self):
        X, y = generate(HeteroGauss(), 30_000, seed=5)
        x = X[:, 0]
        variances = [
            y[(x >= lo) & (x < lo + 1 / 3)].var() for lo in [0.0, 1 / 3, 2 / 3]
        ]
        assert variances[0] < variances[1] < variances[2]

    def test_bimodal_valley_mass(self):
        sc = Bimodal()
        _, y = generate(sc, 20_000, seed=6)
        frac = np.mean((y > -1) & (y < 1))
        # mixture CDF oracle for the same event
        oracle = float(sc.cdf(0.0, 1.0) - sc.cdf(0.0, -1.0))
        assert frac < 0.01
        assert abs(frac - oracle) < 0.005

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            generate(Uniform(), 0, seed=0)


class TestTrueDensity:
    def test_standard_normal_peak(self):
        assert true_density(STANDARD_NORMAL, 0.3, 0.0) == pytest.approx(0.39894, abs=1e-5)

    def test_uniform_inside(self):
        assert true_density(Uniform(), 0.2, 0.5) == 1.0

    def test_uniform_outside(self):
        assert true_density(Uniform(), 0.2, 2.0) == 0.0

    def test_elementwise_broadcast(self):
        sc = HeteroGauss()
        x = np.array([0.0, 0.5, 1.0])
        y = np.array([0.0, 1.0, 2.0])
        out = true_density(sc, x, y)
        assert out.shape == (3,)
        for i in range(3):
            assert out[i] == pytest.approx(float(true_density(sc, x[i], y[i])))


class TestOracleThreshold:
    def test_standard_normal(self):
        t = oracle_threshold(STANDARD_NORMAL, alpha=0.1, mc_n=200_000, seed=0)
        assert t == pytest.approx(norm.pdf(norm.ppf(0.95)), abs=2e-3)  # ~0.10314

    def test_uniform_is_flat(self):
        assert oracle_threshold(Uniform(), alpha=0.1, mc_n=20_000, seed=0) == 1.0

    def test_bimodal_matches_grid_search(self):
        sc = Bimodal()
        # dense-grid exhaustive search: sweep thresholds over quadrature
        # cell densities, keep the largest with mass >= 0.9
        ys = np.linspace(*sc.support(0.0), 200_001)
        dens = sc.density(0.0, ys)
        w = np.gradient(ys) * dens
        order = np.argsort(dens)[::-1]
        mass = np.cumsum(w[order])
        t_grid = dens[order][np.searchsorted(mass, 0.9)]
        t_mc = oracle_threshold(sc, alpha=0.1, mc_n=1_000_000, seed=1)
        assert abs(t_mc - t_grid) <= 1e-3

    def test_mc_n_floor(self):
        with pytest.raises(ValueError):
            oracle_threshold(Uniform(), alpha=0.1, mc_n=100)

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            oracle_threshold(Uniform(), alpha=1.2)


class TestOracleSet:
    def test_standard_normal_central_interval(self):
        t_exact = float(norm.pdf(norm.ppf(0.95)))
        comps = oracle_set(STANDARD_NORMAL, x=0.5, t_prime=t_exact)
        assert len(comps) == 1
        lo, hi = comps[0]
        assert lo == pytest.approx(-1.6449, abs=2e-3)
        assert hi == pytest.approx(1.6449, abs=2e-3)
        assert (hi - lo) == pytest.approx(3.290, abs=0.005)

    def test_bimodal_two_components(self):
        sc = Bimodal()
        t_exact = float(norm.pdf(norm.ppf(0.95)))  # overlap mass is negligible
        comps = oracle_set(sc, x=0.5, t_prime=t_exact)
        assert len(comps) == 2
        total = sum(hi - lo for lo, hi in comps)
        per_mode = 2 * 0.5 * norm.ppf(0.95)
        assert total == pytest.approx(2 * per_mode, abs=0.01)

    def test_uniform_full_support(self):
        comps = oracle_set(Uniform(), x=0.0, t_prime=1.0)
        assert len(comps) == 1
        assert comps[0][0] == pytest.approx(0.0, abs=1e-9)
        assert comps[0][1] == pytest.approx(1.0, abs=1e-9)

    def test_empty_when_threshold_clears_peak(self):
        comps = oracle_set(STANDARD_NORMAL, x=0.5, t_prime=0.5)
        assert comps == []

    def test_expected_length_standard_normal(self):
        t_exact = float(norm.pdf(norm.ppf(0.95)))
        summary = oracle_expected_length(STANDARD_NORMAL, t_exact, n_x=50, seed=0)
        assert summary.expected_length == pytest.approx(3.290, abs=0.005)
        assert summary.mc_se < 1e-9  # identical across x for this scenario

    def test_level_sets_reach_target_coverage(self):
        # P(f(Y|X) >= t') >= 1 - alpha within Monte-Carlo error, i.e. the
        # level sets at the calibrated threshold actually cover
        alpha = 0.1
        rng = np.random.default_rng(21)
        for sc in _scenarios():
            t_prime = oracle_threshold(sc, alpha, mc_n=100_000, seed=13)
            x = sc.sample_x(50_000, rng)
            y = sc.sample_y(x, rng)
            cover = np.mean(sc.density(x, y) >= t_prime)
            assert cover >= 1 - alpha - 0.01, sc.name


class TestNeymanPearsonOptimality:
    def test_no_threshold_set_beats_oracle(self):
        # exhaustive thresholding on the discretized density: every
        # candidate super-level set with mass >= 0.9 must be at least as
        # long as the oracle level set, up to grid tolerance
        alpha = 0.1
        rng = np.random.default_rng(11)
        for sc in _scenarios():
            t_prime = oracle_threshold(sc, alpha, mc_n=400_000, seed=3)
            xs = rng.uniform(0, 1, size=150)
            cell_dens, cell_len = [], []
            for x in xs:
                lo, hi = sc.support(float(x))
                ys = np.linspace(lo, hi, 801)
                mids = 0.5 * (ys[:-1] + ys[1:])
                cell_dens.append(sc.density(float(x), mids))
                cell_len.append(np.full(mids.size, (hi - lo) / 800))
            dens = np.concatenate(cell_dens)
            lens = np.concatenate(cell_len)
            mass = dens * lens / xs.size
            length = lens / xs.size

            oracle_len = np.mean(
                [sum(h - l for l, h in oracle_set(sc, float(x), t_prime)) for x in xs]
            )
            # candidate sets are full super-level sets {density >= t}: a
            # threshold cannot split a block of tied densities
            order = np.argsort(dens)[::-1]
            cum_mass = np.cumsum(mass[order])
            cum_len = np.cumsum(length[order])
            sorted_dens = dens[order]
            block_end = np.flatnonzero(
                np.concatenate((sorted_dens[1:] != sorted_dens[:-1], [True]))
            )
            feasible = cum_mass[block_end] >= 1 - alpha
            assert feasible.any()
            best_len = cum_len[block_end][np.argmax(feasible)]
            assert best_len >= oracle_len - 0.03 * max(oracle_len, 1e-12), sc.name


class TestSectionFourApproximation:
    def test_inverse_length_tracks_density(self):
        # with exact quantiles, 1/(K * interval length) approximates the
        # density at the interval midpoint to within a Lipschitz margin
        sc = HeteroGauss()
        levels = QuantileLevels(40)
        K = levels.n_intervals
        phi_prime_max = norm.pdf(1.0)  # |phi'| peaks at +-1
        for x in np.linspace(0.0, 1.0, 9):
            edges = sc.quantile(np.array([x]), levels.levels)[0]
            lengths = np.diff(edges)
            mids = 0.5 * (edges[:-1] + edges[1:])
            dens = sc.density(x, mids)
            sigma = 1.0 + x
            lip = phi_prime_max / sigma**2
            gap = np.abs(dens - 1.0 / (K * lengths))
            assert np.all(gap <= lip * lengths + 1e-12)

    def test_threshold_consistency_single_seed(self):
        # 1/(K t) approximates the marginal density threshold
        sc = HeteroGauss()
        levels = QuantileLevels(100)
        model = oracle_quantile_model(sc, levels)
        X, y = generate(sc, 5000, seed=17)
        grids = model.predict_grid(X)
        scores, _ = batch_scores(grids, y, "infinite")
        th = calibrate_threshold(scores, 0.1)
        t_prime = oracle_threshold(sc, 0.1, mc_n=400_000, seed=3)
        assert abs(1.0 / (levels.n_intervals * th.t) - t_prime) <= 0.15 * t_prime

    def test_prediction_set_density_floor(self):
        # every selected interval keeps the conditional density above the
        # mass/Lipschitz lower bound, so the set sits inside a level set
        sc = HeteroGauss()
        levels = QuantileLevels(40)
        K = levels.n_intervals
        model = oracle_quantile_model(sc, levels)
        X, y = generate(sc, 2000, seed=23)
        scores, _ = batch_scores(model.predict_grid(X), y, "infinite")
        th = calibrate_threshold(scores, 0.1)
        phi_prime_max = norm.pdf(1.0)
        for x in np.linspace(0.0, 1.0, 7):
            edges = sc.quantile(np.array([x]), levels.levels)[0]
            lengths = np.diff(edges)
            sigma = 1.0 + x
            lip = phi_prime_max / sigma**2
            for k in np.flatnonzero(lengths <= th.t):
                mass = float(sc.cdf(x, edges[k + 1]) - sc.cdf(x, edges[k]))
                delta = 1.0 - K * mass
                floor = (1.0 - delta) / (K * th.t) - lip * th.t / 2.0
                ys = np.linspace(edges[k], edges[k + 1], 50)
                assert sc.density(x, ys).min() >= floor - 1e-9


class TestTrueQuantiles:
    def test_shape_and_monotonicity(self):
        sc = LogNormal()
        X = np.linspace(0, 1, 5)[:, None]
        q = true_quantiles(sc, X, [0.1, 0.5, 0.9])
        assert q.shape == (5, 3)
        assert np.all(np.diff(q, axis=1) > 0)


class TestLipschitzBound:
    def test_linear_function_tight(self):
        lo, hi = lipschitz_bound(0.0, 1.0, mass=0.5, lipschitz=1.0)
        assert lo == pytest.approx(0.0)
        assert hi == pytest.approx(1.0)

    def test_constant_function(self):
        lo, hi = lipschitz_bound(2.0, 5.0, mass=3.0 * 7.5, lipschitz=0.0)
        assert lo == hi == pytest.approx(7.5)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            lipschitz_bound(1.0, 1.0, mass=0.5, lipschitz=1.0)
        with pytest.raises(ValueError):
            lipschitz_bound(0.0, 1.0, mass=0.5, lipschitz=-2.0)

    def test_random_piecewise_linear_respects_band(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a = rng.uniform(-2, 2)
            b = a + rng.uniform(0.2, 3.0)
            lip = rng.uniform(0.1, 5.0)
            knots = np.sort(np.concatenate(([a, b], rng.uniform(a, b, size=6))))
            values = np.empty(knots.size)
            values[0] = rng.uniform(0, 2)
            for i in range(1, knots.size):
                step = knots[i] - knots[i - 1]
                values[i] = values[i - 1] + rng.uniform(-lip, lip) * step
            grid = np.linspace(a, b, 2001)
            f = np.interp(grid, knots, values)
            mass = np.trapezoid(f, grid)
            lo, hi = lipschitz_bound(a, b, mass, lip)
            assert f.min() >= lo - 1e-9
            assert f.max() <= hi + 1e-9
