import math

import numpy as np
import pytest

from tvpf.stats import (
    WeightedSample,
    coverage,
    error_field,
    rmse,
    weighted_histogram,
    weighted_mean,
    weighted_quantile,
    weighted_quantiles,
)


def uniform_sample(values):
    values = np.asarray(values, dtype=float)
    return WeightedSample(values, np.full(values.shape[0], 1.0 / values.shape[0]))


class TestWeightedSample:
    def test_rejects_bad_weights(self):
        with pytest.raises(ValueError):
            WeightedSample(np.ones(3), np.array([0.5, 0.5, 0.5]))
        with pytest.raises(ValueError):
            WeightedSample(np.ones(3), np.array([1.2, -0.1, -0.1]))
        with pytest.raises(ValueError):
            WeightedSample(np.ones((0,)), np.ones(0))


class TestWeightedMean:
    def test_equal_weights_is_arithmetic_mean(self):
        assert weighted_mean(uniform_sample([1.0, 2.0, 6.0])) == pytest.approx(3.0)

    def test_point_mass(self):
        ws = WeightedSample(np.array([5.0, 7.0]), np.array([0.0, 1.0]))
        assert weighted_mean(ws) == 7.0

    def test_hand_computed(self):
        ws = WeightedSample(np.array([1.0, 3.0]), np.array([0.25, 0.75]))
        assert weighted_mean(ws) == pytest.approx(2.5)

    def test_within_range_property(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            vals = rng.normal(size=20)
            w = rng.dirichlet(np.ones(20))
            m = weighted_mean(WeightedSample(vals, w))
            assert vals.min() - 1e-12 <= m <= vals.max() + 1e-12


class TestWeightedQuantile:
    def test_point_mass_every_quantile(self):
        ws = WeightedSample(np.full(5, 3.3), np.full(5, 0.2))
        for q in (0.0, 0.16, 0.5, 0.975, 1.0):
            assert weighted_quantile(ws, q) == 3.3

    def test_cumulative_rule_on_1_to_100(self):
        ws = uniform_sample(np.arange(1.0, 101.0))
        assert weighted_quantile(ws, 0.5) == 50.0

    def test_boundaries(self):
        ws = uniform_sample([4.0, 1.0, 9.0])
        assert weighted_quantile(ws, 0.0) == 1.0
        assert weighted_quantile(ws, 1.0) == 9.0

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            weighted_quantile(uniform_sample([1.0]), 1.5)

    def test_monotone_in_q(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            vals = rng.normal(size=40)
            w = rng.dirichlet(np.ones(40))
            qs = np.sort(rng.random(8))
            out = weighted_quantiles(vals, w, qs)
            assert np.all(np.diff(out) >= 0.0)

    def test_matrix_columns(self):
        vals = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]])
        out = weighted_quantiles(vals, np.full(3, 1 / 3), (0.5,))
        assert np.array_equal(out[0], [2.0, 20.0])


class TestScores:
    def test_rmse_zero_and_offset(self):
        a = np.array([1.0, 2.0, 3.0])
        assert rmse(a, a) == 0.0
        assert rmse(a + 0.5, a) == pytest.approx(0.5)

    def test_rmse_hand_value(self):
        assert rmse(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == pytest.approx(math.sqrt(12.5))

    def test_rmse_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse(np.zeros(3), np.zeros(4))

    def test_error_field(self):
        truth = np.array([[1.0, 2.0], [3.0, 4.0]])
        est = np.array([[1.5, 2.0], [2.0, 6.0]])
        assert np.array_equal(error_field(truth, est), [[0.5, 0.0], [1.0, 2.0]])
        assert error_field(truth, truth).sum() == 0.0

    def test_coverage(self):
        truth = np.array([1.0, 2.0, 3.0])
        assert coverage(truth, truth - 1, truth + 1) == 1.0
        assert coverage(truth, truth, truth) == 1.0
        assert coverage(truth, truth + 1, truth + 2) == 0.0
        assert coverage(truth, np.array([0.0, 3.0, 2.0]), np.array([2.0, 4.0, 10.0])) == pytest.approx(2 / 3)


class TestWeightedHistogram:
    def test_single_bin_mass(self):
        edges, masses = weighted_histogram(uniform_sample([1.0, 2.0, 3.0]), 1)
        assert masses.shape == (1,)
        assert masses[0] == pytest.approx(1.0)

    def test_point_mass_sample(self):
        edges, masses = weighted_histogram(uniform_sample([2.0, 2.0, 2.0]), 5)
        assert masses.sum() == pytest.approx(1.0)
        assert np.count_nonzero(masses) == 1

    def test_near_degenerate_sample_within_ulps(self):
        # a collapsed ensemble spans a few ulps; binning must not fail
        base = 4.307269963526103
        vals = base + np.spacing(base) * np.array([0.0, 1.0, 2.0, 0.0, 1.0])
        edges, masses = weighted_histogram(uniform_sample(vals), 30)
        assert masses.sum() == pytest.approx(1.0)
        assert np.all(np.isfinite(edges))
        assert np.all(np.diff(edges) > 0)

    def test_uniform_values_spread(self):
        rng = np.random.default_rng(11)
        vals = rng.random(200_000)
        edges, masses = weighted_histogram(uniform_sample(vals), 10)
        assert np.allclose(masses, 0.1, atol=0.01)

    def test_mass_conservation_weighted(self):
        rng = np.random.default_rng(3)
        vals = rng.normal(size=500)
        w = rng.dirichlet(np.ones(500))
        _, masses = weighted_histogram(WeightedSample(vals, w), 30)
        assert abs(masses.sum() - 1.0) < 1e-12

    def test_rejects_bad_bins(self):
        with pytest.raises(ValueError):
            weighted_histogram(uniform_sample([1.0]), 0)
