"""Pooling operators: order-insensitive baselines and the ranking encoder."""

import numpy as np
import pytest

from rankpool.pooling import avg_pool, max_pool, rank_pool, temporal_pyramid
from rankpool.solver import SvrConfig
from rankpool.types import FrameSequence

RNG = np.random.default_rng(42)


def seq_of(matrix, id="s"):
    return FrameSequence.from_matrix(np.asarray(matrix, dtype=float), id=id)


class TestAvgPool:
    def test_mean_frame(self):
        enc = avg_pool(seq_of([[0.0, 2.0], [4.0, 6.0]]))
        np.testing.assert_allclose(enc.values, [2.0, 4.0])

    def test_stationarity_of_least_squares(self):
        """The mean zeroes the gradient of sum_t ||u - v_t||^2."""
        m = RNG.normal(size=(11, 5))
        u = avg_pool(seq_of(m)).values
        grad = 2.0 * (11 * u - m.sum(axis=0))
        np.testing.assert_allclose(grad, np.zeros(5), atol=1e-12)

    def test_permutation_invariant(self):
        m = RNG.normal(size=(8, 3))
        perm = np.random.default_rng(0).permutation(8)
        np.testing.assert_allclose(avg_pool(seq_of(m)).values,
                                   avg_pool(seq_of(m[perm])).values,
                                   atol=1e-12)


class TestMaxPool:
    def test_componentwise_maximum(self):
        enc = max_pool(seq_of([[1.0, 5.0], [3.0, 2.0]]))
        np.testing.assert_array_equal(enc.values, [3.0, 5.0])

    def test_permutation_invariant(self):
        m = RNG.normal(size=(8, 3))
        perm = np.random.default_rng(1).permutation(8)
        np.testing.assert_array_equal(max_pool(seq_of(m)).values,
                                      max_pool(seq_of(m[perm])).values)


class TestTemporalPyramid:
    def test_two_level_average_example(self):
        enc = temporal_pyramid(seq_of([[0.0], [2.0], [4.0], [6.0]]))
        np.testing.assert_allclose(enc.values, [3.0, 1.0, 5.0])

    def test_odd_length_gives_extra_frame_to_first_half(self):
        enc = temporal_pyramid(seq_of([[0.0], [2.0], [10.0]]))
        np.testing.assert_allclose(enc.values, [4.0, 1.0, 10.0])

    def test_single_frame_repeats_three_times(self):
        enc = temporal_pyramid(seq_of([[7.0, -1.0]]))
        np.testing.assert_array_equal(enc.values, [7.0, -1.0, 7.0, -1.0, 7.0, -1.0])

    def test_max_base(self):
        enc = temporal_pyramid(seq_of([[1.0], [9.0], [4.0], [2.0]]), base="max")
        np.testing.assert_array_equal(enc.values, [9.0, 9.0, 4.0])

    def test_output_width_triples_input(self):
        enc = temporal_pyramid(seq_of(RNG.normal(size=(6, 4))))
        assert enc.dim == 12

    def test_sees_halves_but_not_order_within_them(self):
        m = RNG.normal(size=(6, 2))
        swapped = np.vstack([m[3:], m[:3]])
        a = temporal_pyramid(seq_of(m)).values
        b = temporal_pyramid(seq_of(swapped)).values
        assert not np.allclose(a, b)


class TestRankPool:
    def test_order_sensitive_where_average_is_not(self):
        """Reversing a ramp flips the ranking weight but leaves the
        average untouched."""
        ramp = np.linspace(-1.0, 1.0, 16).reshape(-1, 1)
        fwd = rank_pool(seq_of(ramp), SvrConfig(c=10.0))
        rev = rank_pool(seq_of(ramp[::-1].copy()), SvrConfig(c=10.0))
        assert fwd.vector[0] > 0.0
        assert rev.vector[0] < 0.0
        np.testing.assert_allclose(avg_pool(seq_of(ramp)).values,
                                   avg_pool(seq_of(ramp[::-1])).values,
                                   atol=1e-12)

    def test_default_config(self):
        m = RNG.normal(size=(10, 3))
        explicit = rank_pool(seq_of(m), SvrConfig())
        implicit = rank_pool(seq_of(m))
        np.testing.assert_array_equal(explicit.vector, implicit.vector)

    def test_solution_record_is_consistent(self):
        m = RNG.normal(size=(14, 4))
        sol = rank_pool(seq_of(m), SvrConfig(c=2.0))
        assert sol.u.provenance == "rank"
        assert sol.grad_norm <= SvrConfig().tol
        assert sol.residuals.shape == (14,)
        np.testing.assert_array_equal(sol.active, sol.residuals != 0.0)
        assert sol.vector.shape == (4,)

    def test_encoding_dim_matches_frame_dim(self):
        assert rank_pool(seq_of(RNG.normal(size=(9, 6)))).u.dim == 6
