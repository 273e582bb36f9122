"""Tests for threshold calibration, set construction, and the baselines."""

import numpy as np
import pytest

from cti import (
    DataError,
    FunctionQuantileModel,
    HeteroGauss,
    QuantileLevels,
    batch_scores,
    build_partition,
    calibrate_threshold,
    conformity_score,
    cqr,
    generate,
    harmonic_aggregate,
    harmonic_batch_scores,
    harmonic_predict_set,
    oracle_quantile_model,
    predict_set,
    rank_index,
    set_contains,
    split_conformal,
)


class TestRankIndex:
    def test_examples(self):
        assert rank_index(9, 0.1) == 9
        assert rank_index(99, 0.1) == 90
        assert rank_index(4, 0.5) == 3

    def test_saturation(self):
        assert rank_index(2, 0.05) == 3  # exceeds n_cal

    def test_float_dust_does_not_round_up(self):
        # (1 + n)(1 - alpha) that is an exact integer must stay put
        assert rank_index(19, 0.05) == 19
        assert rank_index(999, 0.1) == 900

    def test_invalid(self):
        with pytest.raises(ValueError):
            rank_index(0, 0.1)
        for alpha in [0.0, 1.0, -0.5]:
            with pytest.raises(ValueError):
                rank_index(10, alpha)


class TestCalibrateThreshold:
    def test_nine_scores(self):
        th = calibrate_threshold([0.1 * i for i in range(1, 10)], 0.1)
        assert th.t == pytest.approx(0.9)
        assert (th.rank, th.n_cal) == (9, 9)

    def test_ties(self):
        th = calibrate_threshold([0.5, 0.5, 0.5], 0.5)
        assert (th.t, th.rank) == (0.5, 2)

    def test_small_sample_saturates_to_inf(self):
        th = calibrate_threshold([1.0, 2.0], 0.05)
        assert th.rank == 3
        assert th.t == np.inf

    def test_accepts_conformity_scores(self):
        p = build_partition([0, 1, 3, 6])
        scores = [conformity_score(p, y) for y in [0.5, 2.0, 4.0]]
        th = calibrate_threshold(scores, 0.5)
        assert th.t == 2.0  # rank 2 of {1, 2, 3}

    def test_inf_scores_sort_last(self):
        th = calibrate_threshold([np.inf, 0.2, 0.1, np.inf], 0.5)
        # rank = ceil(5 * 0.5) = 3 -> third smallest
        assert th.t == np.inf or th.t == 0.2
        assert th.t == np.inf  # {0.1, 0.2, inf, inf}

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            calibrate_threshold([], 0.1)

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(0)
        scores = rng.exponential(size=200)
        ts = [calibrate_threshold(scores, a).t for a in [0.05, 0.1, 0.2, 0.4]]
        assert all(ts[i] >= ts[i + 1] for i in range(len(ts) - 1))


class TestPredictSet:
    def setup_method(self):
        self.partition = build_partition([0, 0.5, 0.7, 1.0])  # lengths .5 .2 .3

    def test_merge_adjacent(self):
        s = predict_set(self.partition, 0.3)
        np.testing.assert_allclose(s.components, [[0.5, 1.0]])
        assert s.size == pytest.approx(0.5)
        assert s.n_components == 1

    def test_single_interval(self):
        s = predict_set(self.partition, 0.2)
        np.testing.assert_allclose(s.components, [[0.5, 0.7]])
        assert s.size == pytest.approx(0.2)

    def test_empty(self):
        s = predict_set(self.partition, 0.1)
        assert s.n_components == 0
        assert s.size == 0.0

    def test_disjoint_components(self):
        p = build_partition([0, 0.1, 1.0, 1.1, 2.0])
        s = predict_set(p, 0.15)
        np.testing.assert_allclose(s.components, [[0.0, 0.1], [1.0, 1.1]])
        assert s.n_components == 2
        assert s.size == pytest.approx(0.2)

    def test_infinite_threshold_selects_everything(self):
        s = predict_set(self.partition, np.inf)
        np.testing.assert_allclose(s.components, [[0.0, 1.0]])

    def test_fallback_shortest(self):
        s = predict_set(self.partition, 0.1, fallback_shortest=True)
        np.testing.assert_allclose(s.components, [[0.5, 0.7]])

    def test_zero_length_intervals_do_not_appear(self):
        p = build_partition([0.0, 1.0, 1.0, 2.0])
        s = predict_set(p, 0.0)
        assert s.n_components == 0  # the (1, 1] sliver is empty in measure

    def test_nestedness_in_threshold(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = build_partition(np.sort(rng.normal(size=8)))
            t1, t2 = np.sort(rng.uniform(0, 2, size=2))
            s1, s2 = predict_set(p, t1), predict_set(p, t2)
            # every component of s1 lies inside some component of s2
            for lo, hi in s1.components:
                assert any(l2 <= lo and hi <= h2 for l2, h2 in s2.components)

    def test_size_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = build_partition(np.sort(rng.normal(size=10)))
            t = rng.uniform(0, 2)
            s = predict_set(p, t)
            selected = p.lengths[p.lengths <= t + 1e-9]
            assert abs(s.size - selected.sum()) <= 1e-9

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            predict_set(self.partition, -0.5)


class TestSetContains:
    def test_examples(self):
        s = predict_set(build_partition([0, 0.5, 1.0]), 0.5)
        assert set_contains(s, 0.7) is True
        assert set_contains(s, -0.4) is False

    def test_empty_set(self):
        s = predict_set(build_partition([0, 0.5, 1.0]), 0.1)
        assert set_contains(s, 0.7) is False

    def test_closed_endpoints(self):
        p = build_partition([0, 0.1, 1.0, 1.1, 2.0])
        s = predict_set(p, 0.15)
        assert set_contains(s, 0.0) and set_contains(s, 0.1)
        assert set_contains(s, 1.0) and set_contains(s, 1.1)
        assert not set_contains(s, 0.5)

    def test_nan_rejected(self):
        s = predict_set(build_partition([0, 1]), 2.0)
        with pytest.raises(DataError):
            set_contains(s, np.nan)


class TestCalibrationSelfConsistency:
    def test_threshold_covers_rank_many_calibration_points(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            n_cal = rng.integers(20, 200)
            grids = np.sort(rng.normal(size=(n_cal, 9)) * rng.uniform(0.5, 2), axis=1)
            ys = rng.normal(size=n_cal) * 2
            values, clamped = batch_scores(grids, ys, "clamp")
            th = calibrate_threshold(values, 0.1)
            covered = sum(
                predict_set(build_partition(grids[i]), th).contains(ys[i])
                for i in range(n_cal)
                if not clamped[i]
            )
            assert covered + clamped.sum() >= th.rank - 1


class TestMonotonicityInAlpha:
    def test_sets_nest_as_alpha_grows(self):
        rng = np.random.default_rng(4)
        grids = np.sort(rng.normal(size=(150, 11)), axis=1)
        ys = rng.normal(size=150)
        values, _ = batch_scores(grids, ys)
        th_small = calibrate_threshold(values, 0.05)
        th_large = calibrate_threshold(values, 0.3)
        assert th_small.t >= th_large.t
        p = build_partition(np.sort(rng.normal(size=11)))
        s_small, s_large = predict_set(p, th_small), predict_set(p, th_large)
        for lo, hi in s_large.components:
            assert any(l2 <= lo and hi <= h2 for l2, h2 in s_small.components)


class TestCoverageTheoremMonteCarlo:
    def test_marginal_coverage_within_theory_band(self):
        # exchangeable cal/test draws through the oracle quantile model;
        # mean coverage must land in [1-a, 1-a + 1/(n_cal+1) + 3 se]
        scenario = HeteroGauss()
        levels = QuantileLevels(8)
        model = oracle_quantile_model(scenario, levels)
        alpha = 0.1
        n_cal, n_test, trials = 25, 40, 600
        rng = np.random.default_rng(2024)
        coverages = np.empty(trials)
        for t in range(trials):
            X, y = generate(scenario, n_cal + n_test, rng.integers(2**63))
            grids = model.predict_grid(X)
            cal_scores, _ = batch_scores(grids[:n_cal], y[:n_cal], "infinite")
            th = calibrate_threshold(cal_scores, alpha)
            test_scores, _ = batch_scores(grids[n_cal:], y[n_cal:], "infinite")
            coverages[t] = np.mean(test_scores <= th.t)
        mean_cov = coverages.mean()
        se = coverages.std(ddof=1) / np.sqrt(trials)
        assert mean_cov >= 1 - alpha
        assert mean_cov <= 1 - alpha + 1.0 / (n_cal + 1) + 3 * se


class TestSplitConformal:
    @staticmethod
    def _constant_model(value, levels):
        return FunctionQuantileModel(
            levels, lambda X, taus: np.full((len(X), len(taus)), value), 1
        )

    def test_perfect_predictor_degenerates(self):
        levels = QuantileLevels(4)
        model = self._constant_model(2.0, levels)
        X = np.zeros((5, 1))
        y = np.full(5, 2.0)
        res = split_conformal(model, X, y, X, 0.5)
        assert res.q == 0.0
        np.testing.assert_allclose(res.lo, res.hi)

    def test_rank_of_residuals(self):
        levels = QuantileLevels(4)
        model = self._constant_model(0.0, levels)
        X = np.zeros((3, 1))
        y = np.array([1.0, 2.0, 3.0])  # absolute residuals {1, 2, 3}
        res = split_conformal(model, X, y, X, 0.5)
        assert res.q == 2.0  # rank ceil(4 * .5) = 2

    def test_gaussian_noise_quantile(self):
        # oracle median, N(0, 1) noise: Q converges to the 1.645 normal
        # 0.9 quantile of |residuals|
        rng = np.random.default_rng(5)
        levels = QuantileLevels(4)
        model = self._constant_model(0.0, levels)
        n = 10_000
        X = np.zeros((n, 1))
        y = rng.standard_normal(n)
        res = split_conformal(model, X, y, X[:5], 0.1)
        emp = np.sort(np.abs(y))[rank_index(n, 0.1) - 1]
        assert abs(res.q - 1.645) <= 0.05
        assert res.q == emp


class TestCQR:
    def test_sign_convention_shrinks_when_overcovering(self):
        # all calibration responses strictly inside the interval: the
        # calibrated Q is negative and the interval tightens
        levels = QuantileLevels(4)

        def fn(X, taus):
            taus = np.asarray(taus)
            out = np.zeros((len(X), taus.size))
            out[:, taus <= 0.5] = 0.0
            out[:, taus > 0.5] = 1.0
            return out

        model = FunctionQuantileModel(levels, fn, 1)
        X = np.zeros((1, 1))
        y = np.array([0.2])  # margins: 0.2 below, 0.3 above -> score -0.2
        res = cqr(model, X, y, X, 0.5)
        assert res.q == pytest.approx(-0.2)
        np.testing.assert_allclose(res.lo, [0.2])
        np.testing.assert_allclose(res.hi, [0.8])

    def test_exact_upper_boundary_gives_zero(self):
        levels = QuantileLevels(4)
        model = FunctionQuantileModel(
            levels, lambda X, taus: np.tile(np.asarray(taus), (len(X), 1)), 1
        )
        X = np.zeros((4, 1))
        hi_level = levels.levels[levels.nearest(1 - 0.5 / 2)]
        y = np.full(4, hi_level)  # exactly at the upper quantile
        res = cqr(model, X, y, X, 0.5)
        assert res.q == 0.0

    def test_oracle_quantiles_need_no_expansion(self):
        scenario = HeteroGauss()
        levels = QuantileLevels(20)
        model = oracle_quantile_model(scenario, levels)
        X, y = generate(scenario, 10_000, seed=6)
        res = cqr(model, X, y, X[:5], 0.1)
        assert abs(res.q) <= 0.05
        assert res.snap_distance <= (0.999 - 0.001) / 20

    def test_snap_levels_recorded(self):
        levels = QuantileLevels(40)
        model = FunctionQuantileModel(
            levels, lambda X, taus: np.tile(np.asarray(taus), (len(X), 1)), 1
        )
        X = np.zeros((10, 1))
        res = cqr(model, X, np.full(10, 0.5), X, 0.1)
        lo, hi = res.snapped_levels
        assert abs(lo - 0.05) <= 0.0125
        assert abs(hi - 0.95) <= 0.0125
        assert res.snap_distance == pytest.approx(
            max(abs(lo - 0.05), abs(hi - 0.95))
        )


class TestHarmonicAggregate:
    def test_equal_inputs(self):
        assert harmonic_aggregate(1.0, 1.0) == 1.0

    def test_direct_formula(self):
        assert harmonic_aggregate(0.5, 1.0) == pytest.approx(2.0 / 3.0)

    def test_zero_dominates(self):
        assert harmonic_aggregate(0.0, 5.0) == 0.0

    def test_one_infinite(self):
        assert harmonic_aggregate(np.inf, 3.0) == 6.0
        assert harmonic_aggregate(3.0, np.inf) == 6.0

    def test_both_infinite(self):
        assert harmonic_aggregate(np.inf, np.inf) == np.inf

    def test_zero_and_infinite(self):
        assert harmonic_aggregate(0.0, np.inf) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            harmonic_aggregate(-1.0, 2.0)

    def test_elementwise(self):
        out = harmonic_aggregate(np.array([1.0, 0.0]), np.array([1.0, 9.0]))
        np.testing.assert_allclose(out, [1.0, 0.0])


class TestHarmonicPipeline:
    def test_identical_partitions_reduce_to_plain_sets(self):
        rng = np.random.default_rng(7)
        edges = np.sort(rng.normal(size=9))
        p = build_partition(edges)
        for t in [0.1, 0.5, 1.5, np.inf]:
            plain = predict_set(p, t)
            combined = harmonic_predict_set(p, p, t)
            np.testing.assert_allclose(combined.components, plain.components)

    def test_scores_match_componentwise_harmonic(self):
        rng = np.random.default_rng(8)
        ga = np.sort(rng.normal(size=(30, 7)), axis=1)
        gb = np.sort(rng.normal(size=(30, 7)), axis=1)
        ys = rng.normal(size=30)
        combined, _ = harmonic_batch_scores(ga, gb, ys)
        va, _ = batch_scores(ga, ys)
        vb, _ = batch_scores(gb, ys)
        np.testing.assert_allclose(combined, harmonic_aggregate(va, vb))

    def test_membership_matches_score_rule(self):
        # y is in the combined set iff its harmonic score clears the cutoff
        rng = np.random.default_rng(9)
        for _ in range(30):
            pa = build_partition(np.sort(rng.normal(size=6)))
            pb = build_partition(np.sort(rng.normal(size=5)))
            t = rng.uniform(0.05, 1.5)
            s = harmonic_predict_set(pa, pb, t)
            lo = min(pa.edges[0], pb.edges[0])
            hi = max(pa.edges[-1], pb.edges[-1])
            ys = rng.uniform(lo, hi, size=40)
            scores, _ = harmonic_batch_scores(
                np.tile(pa.edges, (40, 1)), np.tile(pb.edges, (40, 1)), ys
            )
            for y, score in zip(ys, scores):
                on_edge = np.any(np.isclose(y, pa.edges)) or np.any(np.isclose(y, pb.edges))
                if on_edge:
                    continue  # closed components vs half-open scores disagree only here
                assert s.contains(y) == (score <= t)

    def test_coverage_guarantee_with_two_oracle_models(self):
        scenario = HeteroGauss()
        model_a = oracle_quantile_model(scenario, QuantileLevels(8))
        model_b = oracle_quantile_model(scenario, QuantileLevels(12))
        rng = np.random.default_rng(10)
        trials, n_cal, n_test = 200, 30, 30
        covs = np.empty(trials)
        for t in range(trials):
            X, y = generate(scenario, n_cal + n_test, rng.integers(2**63))
            ga = model_a.predict_grid(X)
            gb = model_b.predict_grid(X)
            scores, _ = harmonic_batch_scores(ga[:n_cal], gb[:n_cal], y[:n_cal], "infinite")
            th = calibrate_threshold(scores, 0.1)
            test_scores, _ = harmonic_batch_scores(ga[n_cal:], gb[n_cal:], y[n_cal:], "infinite")
            covs[t] = np.mean(test_scores <= th.t)
        assert covs.mean() >= 0.9
        assert covs.mean() <= 0.9 + 1.0 / (n_cal + 1) + 3 * covs.std(ddof=1) / np.sqrt(trials)
