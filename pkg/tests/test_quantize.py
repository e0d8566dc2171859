"""Exact 1-D k-means quantization: optimality, determinism, round trips."""

import numpy as np
import pytest

from sinedelta.errors import CorruptDataError, InputError
from sinedelta.quantize import (Codebook, QuantizedTensor, _nearest_center_indices,
                                dequantize, kmeans_1d, quantization_error,
                                quantize_matrix)

from helpers import exhaustive_kmeans_1d


class TestKmeansPinned:
    def test_constant_input(self):
        cb, asn, cost = kmeans_1d(np.array([1.0, 1.0, 1.0]), 1)
        np.testing.assert_array_equal(cb.centers, [1.0])
        np.testing.assert_array_equal(asn, [0, 0, 0])
        assert cost == 0.0

    def test_separable_pairs(self):
        cb, asn, cost = kmeans_1d(np.array([0.0, 0.0, 10.0, 10.0]), 2)
        np.testing.assert_array_equal(cb.centers, [0.0, 10.0])
        np.testing.assert_array_equal(asn, [0, 0, 1, 1])
        assert cost == 0.0

    def test_five_values_three_clusters(self):
        cb, asn, cost = kmeans_1d(np.array([0.0, 1.0, 4.0, 5.0, 9.0]), 3)
        np.testing.assert_array_equal(cb.centers, [0.5, 4.5, 9.0])
        np.testing.assert_array_equal(asn, [0, 0, 1, 1, 2])
        assert cost == pytest.approx(1.0, rel=1e-12)

    def test_fewer_distinct_values_than_clusters(self):
        cb, asn, cost = kmeans_1d(np.array([5.0, 7.0, 5.0]), 4)
        np.testing.assert_array_equal(cb.centers, [5.0, 7.0])
        np.testing.assert_array_equal(asn, [0, 1, 0])
        assert cost == 0.0

    def test_empty_input_rejected(self):
        with pytest.raises(InputError):
            kmeans_1d(np.array([]), 2)

    def test_bad_k_rejected(self):
        with pytest.raises(InputError):
            kmeans_1d(np.array([1.0, 2.0]), 0)

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            kmeans_1d(np.array([1.0, np.nan]), 1)


class TestKmeansTies:
    """Equal-cost partitions resolve to the leftmost split, deterministically."""

    def test_three_point_tie(self):
        cb, _, cost = kmeans_1d(np.array([0.0, 1.0, 2.0]), 2)
        np.testing.assert_array_equal(cb.centers, [0.0, 1.5])
        assert cost == pytest.approx(0.5, rel=1e-12)

    def test_symmetric_tie(self):
        cb, _, cost = kmeans_1d(np.array([-1.0, -1.0, 1.0, 1.0, 0.0]), 2)
        np.testing.assert_allclose(cb.centers, [-1.0, 2.0 / 3.0], rtol=1e-6)
        assert cost == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_wider_symmetric_tie(self):
        cb, _, cost = kmeans_1d(np.array([-3.0, -1.0, 0.0, 1.0, 3.0]), 2)
        np.testing.assert_allclose(cb.centers, [-2.0, 4.0 / 3.0], rtol=1e-6)
        assert cost == pytest.approx(20.0 / 3.0, rel=1e-12)

    def test_midpoint_assignment_goes_low(self):
        """A value equidistant to two centers takes the lower index."""
        centers = np.array([0.0, 1.0, 2.0], dtype=np.float32)
        idx = _nearest_center_indices(np.array([0.5, 1.5, 0.25, 1.75]), centers)
        np.testing.assert_array_equal(idx, [0, 1, 0, 2])


class TestKmeansOptimality:
    def test_matches_exhaustive_oracle(self):
        """500 random instances with n <= 10, k <= 3: DP cost == oracle cost.

        Equality up to last-ulp float accumulation: the DP sums cluster
        costs through prefix-sum identities, the oracle sums squared
        deviations directly, so the two totals can differ in rounding.
        """
        rng = np.random.default_rng(2024)
        for trial in range(500):
            n = int(rng.integers(1, 11))
            k = int(rng.integers(1, 4))
            if rng.uniform() < 0.3:
                values = rng.integers(-3, 4, size=n).astype(float)
            else:
                values = rng.normal(size=n) * 10.0 ** rng.uniform(-2, 2)
            _, _, cost = kmeans_1d(values, k)
            _, oracle_cost = exhaustive_kmeans_1d(values, k)
            assert abs(cost - oracle_cost) <= 1e-12 * (1.0 + oracle_cost), (
                f"trial {trial}: dp {cost!r} vs oracle {oracle_cost!r}"
            )

    def test_cost_non_increasing_in_k(self):
        rng = np.random.default_rng(9)
        values = rng.normal(size=40)
        costs = [kmeans_1d(values, k)[2] for k in range(1, 9)]
        assert all(c2 <= c1 + 1e-12 for c1, c2 in zip(costs, costs[1:]))

    def test_assignments_are_nearest_center(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            values = rng.normal(size=30)
            cb, asn, _ = kmeans_1d(values, 4)
            centers = cb.centers.astype(np.float64)
            dist = np.abs(values[:, None] - centers[None, :])
            best = dist.min(axis=1)
            np.testing.assert_allclose(np.abs(values - centers[asn]), best, rtol=0, atol=0)


class TestCodebookValidation:
    def test_centers_must_increase(self):
        with pytest.raises(InputError):
            Codebook(centers=np.array([1.0, 1.0], dtype=np.float32), bits=2)

    def test_bits_range(self):
        with pytest.raises(InputError):
            Codebook(centers=np.array([0.0], dtype=np.float32), bits=0)
        with pytest.raises(InputError):
            Codebook(centers=np.array([0.0], dtype=np.float32), bits=17)

    def test_too_many_centers_for_bits(self):
        with pytest.raises(InputError):
            Codebook(centers=np.arange(3, dtype=np.float32), bits=1)

    def test_quantized_tensor_index_range(self):
        cb = Codebook(centers=np.array([0.0, 1.0], dtype=np.float32), bits=1)
        with pytest.raises(InputError):
            QuantizedTensor(shape=(2,), codebook=cb, indices=np.array([0, 5], dtype=np.int32))


class TestQuantizeMatrix:
    def test_three_distinct_values_two_bits_exact(self):
        m = np.array([[0.25, 0.5], [0.75, 0.25]])
        q = quantize_matrix(m, 2)
        np.testing.assert_array_equal(dequantize(q), m)
        assert not quantization_error(m, q).any()

    def test_constant_matrix_one_bit(self):
        m = np.full((3, 3), 2.5)
        q = quantize_matrix(m, 1)
        assert len(q.codebook) == 1
        np.testing.assert_array_equal(dequantize(q), m)

    def test_mse_improves_with_bits(self):
        rng = np.random.default_rng(64)
        m = rng.normal(size=(64, 64))
        err2 = quantization_error(m, quantize_matrix(m, 2))
        err4 = quantization_error(m, quantize_matrix(m, 4))
        assert np.mean(err4**2) < np.mean(err2**2)

    def test_error_norm_decreases_across_bits(self):
        rng = np.random.default_rng(65)
        m = rng.normal(size=(32, 32))
        norms = []
        for bits in range(1, 9):
            err = quantization_error(m, quantize_matrix(m, bits))
            norms.append(np.sqrt(np.sum(err**2)))
        assert all(b <= a for a, b in zip(norms, norms[1:]))

    def test_sixteen_bits_exact_on_float32_values(self):
        rng = np.random.default_rng(66)
        m = rng.normal(size=(50, 20)).astype(np.float32).astype(np.float64)
        q = quantize_matrix(m, 16)
        np.testing.assert_array_equal(dequantize(q), m)

    def test_bits_out_of_range(self):
        with pytest.raises(InputError):
            quantize_matrix(np.ones((2, 2)), 0)
        with pytest.raises(InputError):
            quantize_matrix(np.ones((2, 2)), 17)

    def test_float32_center_collision_merges(self):
        """Distinct float64 values that collide in float32 share one center."""
        m = np.array([[1.0, 1.0 + 2e-9, 5.0, 5.0]])
        q = quantize_matrix(m, 2)
        assert len(q.codebook) == 2


class TestRoundTrip:
    def test_requantization_is_idempotent(self):
        rng = np.random.default_rng(77)
        m = rng.normal(size=(20, 10))
        for bits in (1, 2, 3, 5, 8):
            q1 = quantize_matrix(m, bits)
            q2 = quantize_matrix(dequantize(q1), bits)
            np.testing.assert_array_equal(q1.indices, q2.indices)
            np.testing.assert_array_equal(q1.codebook.centers, q2.codebook.centers)

    def test_dequantize_detects_mutated_indices(self):
        q = quantize_matrix(np.array([[0.0, 1.0], [2.0, 3.0]]), 2)
        q.indices[0] = 99
        with pytest.raises(CorruptDataError):
            dequantize(q)

    def test_error_shape_mismatch(self):
        q = quantize_matrix(np.ones((2, 2)), 1)
        with pytest.raises(InputError):
            quantization_error(np.ones((3, 2)), q)

    def test_constant_error_is_zero_at_any_bits(self):
        m = np.full((4, 5), -1.25)
        for bits in (1, 4, 16):
            assert not quantization_error(m, quantize_matrix(m, bits)).any()
