"""Synthetic data generators and the independent numeric reference routines.

The reference routines (grid search, finite differences, elimination-based
inverse) are checked here against closed forms and numpy, never against the
production code they are later used to certify.
"""

import numpy as np
import pytest

from rankpool.errors import SingularMatrix
from rankpool.pooling import avg_pool
from rankpool.synth import (KINDS, ORDER_PATTERNS, SynthSpec, direct_inverse,
                            fd_gradient, fd_tangent, gen_order_classes,
                            generate, oracle_svr_1d, order_pool,
                            pattern_indices)


class TestSynthSpec:
    def test_defaults_are_valid(self):
        spec = SynthSpec()
        assert spec.kind in KINDS

    @pytest.mark.parametrize("kwargs", [
        {"kind": "nope"},
        {"kind": "order-classes", "k": 4},
        {"k": 0}, {"n": 0}, {"d": 0},
        {"j_min": 5, "j_max": 4},
        {"j_min": 0, "j_max": 4},
        {"noise": -0.1},
    ])
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            SynthSpec(**kwargs)


class TestPatternIndices:
    def test_forward_is_identity(self):
        np.testing.assert_array_equal(pattern_indices("forward", 6), np.arange(6))

    def test_reverse_flips(self):
        np.testing.assert_array_equal(pattern_indices("reverse", 4), [3, 2, 1, 0])

    def test_interleave_swaps_middle_quarters(self):
        np.testing.assert_array_equal(
            pattern_indices("interleave", 8), [0, 1, 4, 5, 2, 3, 6, 7])

    @pytest.mark.parametrize("pattern", ORDER_PATTERNS)
    def test_every_pattern_is_a_permutation(self, pattern):
        idx = pattern_indices(pattern, 40)
        np.testing.assert_array_equal(np.sort(idx), np.arange(40))

    def test_unknown_pattern_rejected(self):
        with pytest.raises(ValueError):
            pattern_indices("sideways", 10)


class TestOrderPool:
    def test_forward_orders_scores_nondecreasing(self):
        rng = np.random.default_rng(2)
        pool = rng.normal(size=(20, 4))
        direction = np.array([1.0, 0.0, 0.0, 0.0])
        ordered = order_pool(pool, "forward", direction)
        assert np.all(np.diff(ordered @ direction) >= 0.0)

    def test_patterns_share_the_frame_multiset(self):
        rng = np.random.default_rng(3)
        pool = rng.normal(size=(16, 3))
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        sorted_rows = {}
        for pattern in ORDER_PATTERNS:
            out = order_pool(pool, pattern, direction)
            sorted_rows[pattern] = np.sort(out.view([("", float)] * 3), axis=0)
        for pattern in ORDER_PATTERNS[1:]:
            np.testing.assert_array_equal(sorted_rows["forward"],
                                          sorted_rows[pattern])


class TestGenerators:
    def test_same_seed_same_dataset(self):
        spec = SynthSpec(kind="order-classes", k=3, n=12, d=4, noise=0.2, seed=9)
        a, b = generate(spec), generate(spec)
        assert [s.id for s in a.sequences] == [s.id for s in b.sequences]
        for sa, sb in zip(a.sequences, b.sequences):
            np.testing.assert_array_equal(sa.matrix, sb.matrix)

    def test_round_robin_labels_and_ids(self):
        ds = generate(SynthSpec(kind="noise", k=2, n=5, d=3, seed=1))
        assert [s.label for s in ds.sequences] == [0, 1, 0, 1, 0]
        assert ds.sequences[0].id == "seq0000"
        assert ds.sequences[4].id == "seq0004"

    def test_lengths_stay_inside_bounds(self):
        ds = generate(SynthSpec(kind="latent-ramp", k=2, n=30, d=2,
                                j_min=5, j_max=9, seed=4))
        lengths = [s.length for s in ds.sequences]
        assert min(lengths) >= 5
        assert max(lengths) <= 9

    def test_order_classes_differ_only_by_frame_order(self):
        """With the noise turned off, the i-th video carries the same frame
        multiset whatever its class pattern is; only the ordering encodes
        the label."""
        base = dict(kind="order-classes", n=6, d=3, j_min=12, j_max=12,
                    noise=0.0, seed=7)
        one = gen_order_classes(SynthSpec(k=1, **base))
        three = gen_order_classes(SynthSpec(k=3, **base))

        def by_rows(m):
            return m[np.lexsort(m.T[::-1])]

        for sa, sb in zip(one.sequences, three.sequences):
            np.testing.assert_allclose(by_rows(sa.matrix), by_rows(sb.matrix),
                                       atol=1e-12)

    def test_relabeling_leaves_average_pooling_blind(self):
        """Swapping a video's class changes its frame order, which the
        average cannot see."""
        base = dict(kind="order-classes", n=4, d=3, j_min=10, j_max=10,
                    noise=0.0, seed=5)
        one = gen_order_classes(SynthSpec(k=1, **base))
        two = gen_order_classes(SynthSpec(k=2, **base))
        assert one.sequences[1].label != two.sequences[1].label
        assert not np.array_equal(one.sequences[1].matrix, two.sequences[1].matrix)
        np.testing.assert_allclose(avg_pool(one.sequences[1]).values,
                                   avg_pool(two.sequences[1]).values,
                                   atol=1e-12)

    def test_per_video_streams_are_independent_of_n(self):
        """Adding videos to a dataset does not disturb the earlier ones."""
        short = generate(SynthSpec(kind="noise", k=2, n=3, d=2, seed=6))
        long = generate(SynthSpec(kind="noise", k=2, n=8, d=2, seed=6))
        for i in range(3):
            np.testing.assert_array_equal(short.sequences[i].matrix,
                                          long.sequences[i].matrix)


class TestOracleSvr1d:
    def test_matches_closed_form_with_all_frames_active(self):
        """For V=(1,2), eps=0, C=1 every frame is active and the minimizer
        solves u + 5(u - 1) = 0, so u = 5/6."""
        u = oracle_svr_1d(np.array([1.0, 2.0]), c=1.0, epsilon=0.0)
        assert u == pytest.approx(5.0 / 6.0, abs=1e-5)

    def test_refinement_tightens_the_estimate(self):
        v = np.array([0.5, 1.5, 2.5, 4.0])
        coarse = oracle_svr_1d(v, c=2.0, epsilon=0.1, step=1e-2, refinements=0)
        fine = oracle_svr_1d(v, c=2.0, epsilon=0.1, step=1e-2, refinements=2)
        exact = oracle_svr_1d(v, c=2.0, epsilon=0.1, step=1e-5, refinements=1)
        assert abs(fine - exact) <= abs(coarse - exact) + 1e-12


class TestFiniteDifferences:
    def test_gradient_of_cubic(self):
        grad = fd_gradient(lambda x: float(x[0] ** 3), np.array([2.0]))
        assert grad[0] == pytest.approx(12.0, abs=1e-8)

    def test_gradient_of_quadratic_form(self):
        a = np.array([[2.0, 0.5], [0.5, 1.0]])
        x = np.array([0.3, -1.2])
        grad = fd_gradient(lambda z: float(z @ a @ z), x)
        np.testing.assert_allclose(grad, 2.0 * a @ x, atol=1e-8)

    def test_tangent_of_vector_curve(self):
        tangent = fd_tangent(lambda t: np.array([t ** 2, np.sin(t)]), 0.7)
        np.testing.assert_allclose(tangent, [1.4, np.cos(0.7)], atol=1e-8)


class TestDirectInverse:
    def test_identity(self):
        np.testing.assert_allclose(direct_inverse(np.eye(4)), np.eye(4), atol=1e-14)

    def test_agrees_with_numpy_on_random_spd(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=(8, 8))
        spd = a @ a.T + 8 * np.eye(8)
        np.testing.assert_allclose(direct_inverse(spd), np.linalg.inv(spd),
                                   atol=1e-10)

    def test_product_with_input_is_identity(self):
        rng = np.random.default_rng(15)
        a = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        np.testing.assert_allclose(direct_inverse(a) @ a, np.eye(6), atol=1e-9)

    def test_singular_matrix_raises(self):
        singular = np.ones((3, 3))
        with pytest.raises(SingularMatrix):
            direct_inverse(singular)
