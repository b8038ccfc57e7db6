"""Lattice-aligned histograms: binning, pooling, CDFs, KS distance."""

import numpy as np
import pytest

from kinex.histogram import (
    MoneyHistogram,
    histogram_cdf,
    histogram_from_balances,
    histogram_ks,
    pool_histograms,
)


class TestConstruction:
    def test_bins_land_on_lattice(self):
        hist = histogram_from_balances(np.array([0.5, 1.5, 2.5, 2.6]), bin_width=1.0)
        assert hist.origin == 0.0
        assert hist.num_bins == 3
        np.testing.assert_array_equal(hist.counts, [1.0, 1.0, 2.0])
        assert hist.total == 4.0

    def test_negative_balances_get_their_own_bins(self):
        hist = histogram_from_balances(np.array([-3.2, -0.1, 4.9]), bin_width=1.0)
        assert hist.origin == -4.0
        assert hist.num_bins == 9
        assert hist.counts[0] == 1.0  # [-4, -3)
        assert hist.counts[3] == 1.0  # [-1, 0)
        assert hist.counts[8] == 1.0  # [4, 5)

    def test_anchor_shifts_the_lattice(self):
        hist = histogram_from_balances(np.array([0.2, 0.8]), bin_width=1.0, anchor=-0.5)
        assert hist.origin == -0.5
        np.testing.assert_array_equal(hist.counts, [1.0, 1.0])

    def test_moments_come_from_raw_balances(self):
        data = np.array([1.0, 2.0, 3.0, 10.0])
        hist = histogram_from_balances(data, bin_width=5.0)
        assert hist.sample_mean == pytest.approx(data.mean())
        assert hist.sample_variance == pytest.approx(data.var(ddof=1))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            histogram_from_balances(np.array([]), bin_width=1.0)
        with pytest.raises(ValueError):
            histogram_from_balances(np.array([1.0]), bin_width=0.0)
        with pytest.raises(ValueError):
            MoneyHistogram(
                bin_width=1.0,
                origin=0.0,
                counts=np.array([1.0]),
                total=0.0,
                sample_mean=0.0,
                sample_variance=0.0,
            )

    def test_edges_and_centers(self):
        hist = histogram_from_balances(np.array([0.5, 1.5]), bin_width=1.0)
        np.testing.assert_allclose(hist.bin_edges(), [0.0, 1.0, 2.0])
        np.testing.assert_allclose(hist.bin_centers(), [0.5, 1.5])

    def test_top_edge_value_joins_last_bin(self):
        hist = histogram_from_balances(np.array([0.0, 1.0, 2.0]), bin_width=1.0)
        assert hist.counts.sum() == 3.0
        assert hist.counts[-1] >= 1.0


class TestPooling:
    def test_pool_is_exact_count_sum(self):
        a = histogram_from_balances(np.array([0.5, 1.5]), bin_width=1.0)
        b = histogram_from_balances(np.array([2.5, 3.5]), bin_width=1.0)
        pooled = pool_histograms([a, b])
        assert pooled.origin == 0.0
        np.testing.assert_array_equal(pooled.counts, [1.0, 1.0, 1.0, 1.0])
        assert pooled.total == 4.0

    def test_pool_matches_single_pass(self):
        rng = np.random.default_rng(7)
        chunks = [rng.exponential(100.0, size=500) for _ in range(8)]
        pooled = pool_histograms(
            [histogram_from_balances(c, bin_width=25.0) for c in chunks]
        )
        direct = histogram_from_balances(np.concatenate(chunks), bin_width=25.0)
        assert pooled.origin == direct.origin
        np.testing.assert_array_equal(pooled.counts, direct.counts)
        assert pooled.sample_mean == pytest.approx(direct.sample_mean)

    def test_pooled_mean_weights_by_total(self):
        a = histogram_from_balances(np.full(3, 1.5), bin_width=1.0)
        b = histogram_from_balances(np.full(1, 7.5), bin_width=1.0)
        pooled = pool_histograms([a, b])
        assert pooled.sample_mean == pytest.approx(3.0)

    def test_misaligned_lattices_refused(self):
        a = histogram_from_balances(np.array([0.5]), bin_width=1.0)
        b = histogram_from_balances(np.array([0.5]), bin_width=1.0, anchor=0.3)
        with pytest.raises(ValueError):
            pool_histograms([a, b])
        c = histogram_from_balances(np.array([0.5]), bin_width=2.0)
        with pytest.raises(ValueError):
            pool_histograms([a, c])
        with pytest.raises(ValueError):
            pool_histograms([])


class TestCdfAndKs:
    def test_cdf_endpoints(self):
        hist = histogram_from_balances(np.array([0.5, 1.5, 1.6]), bin_width=1.0)
        edges, cdf = histogram_cdf(hist)
        assert cdf[0] == 0.0
        assert cdf[-1] == pytest.approx(1.0)
        assert edges.shape == cdf.shape

    def test_ks_of_identical_is_zero(self):
        hist = histogram_from_balances(np.random.default_rng(0).exponential(1, 100), 0.5)
        assert histogram_ks(hist, hist) == 0.0

    def test_ks_of_disjoint_is_one(self):
        a = histogram_from_balances(np.array([0.5, 0.6]), bin_width=1.0)
        b = histogram_from_balances(np.array([5.5, 5.6]), bin_width=1.0)
        assert histogram_ks(a, b) == pytest.approx(1.0)

    def test_ks_known_value(self):
        # half the mass shifted one bin: sup CDF gap is exactly 0.5
        a = histogram_from_balances(np.array([0.5, 0.5]), bin_width=1.0)
        b = histogram_from_balances(np.array([0.5, 1.5]), bin_width=1.0)
        assert histogram_ks(a, b) == pytest.approx(0.5)

    def test_ks_shrinks_with_sample_size(self):
        rng = np.random.default_rng(3)
        small = histogram_from_balances(rng.exponential(100, 200), 10.0)
        big = histogram_from_balances(rng.exponential(100, 200_000), 10.0)
        ref = histogram_from_balances(rng.exponential(100, 200_000), 10.0)
        assert histogram_ks(big, ref) < histogram_ks(small, ref)
