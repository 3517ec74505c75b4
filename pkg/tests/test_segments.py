import numpy as np

from crowdbp.segments import (build_grouping, expand, segment_loo_prod,
                              segment_prod, segment_sum)


def reference_reduce(keys, values, n_segments, op, empty):
    out = [empty] * n_segments
    for k, v in zip(keys, values):
        out[k] = op(out[k], v)
    return np.array(out)


def test_sum_and_prod_match_loop_reference():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n_seg = int(rng.integers(1, 8))
        m = int(rng.integers(0, 30))
        keys = rng.integers(0, n_seg, size=m)
        values = rng.uniform(0.1, 2.0, size=m)
        g = build_grouping(keys, n_seg)
        np.testing.assert_allclose(
            segment_sum(values, g),
            reference_reduce(keys, values, n_seg, lambda a, b: a + b, 0.0))
        np.testing.assert_allclose(
            segment_prod(values, g),
            reference_reduce(keys, values, n_seg, lambda a, b: a * b, 1.0))


def test_empty_segments_get_identity_elements():
    g = build_grouping(np.array([2, 2]), 4)
    np.testing.assert_array_equal(segment_sum(np.array([3.0, 4.0]), g), [0, 0, 7, 0])
    np.testing.assert_array_equal(segment_prod(np.array([3.0, 4.0]), g), [1, 1, 12, 1])


def test_prod_depends_only_on_value_multiset():
    # Two segments holding the same values in different orders must round to
    # bit-identical products; belief ties rely on this.
    keys = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    values = np.array([0.7, 0.3, 0.7, 0.3, 0.3, 0.3, 0.7, 0.7])
    out = segment_prod(values, build_grouping(keys, 2))
    assert out[0] == out[1]


def test_loo_prod_is_exact_with_zero_factors():
    keys = np.array([0, 0, 0])
    values = np.array([0.0, 5.0, 2.0])
    out = segment_loo_prod(values, build_grouping(keys, 1))
    np.testing.assert_array_equal(out, [10.0, 0.0, 0.0])


def test_loo_prod_matches_reference_in_natural_edge_order():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n_seg = int(rng.integers(1, 6))
        m = int(rng.integers(1, 20))
        keys = rng.integers(0, n_seg, size=m)
        values = rng.uniform(0.5, 1.5, size=m)
        out = segment_loo_prod(values, build_grouping(keys, n_seg))
        for e in range(m):
            others = values[(keys == keys[e]) & (np.arange(m) != e)]
            np.testing.assert_allclose(out[e], np.prod(others) if others.size else 1.0,
                                       rtol=1e-12)


def test_reductions_support_trailing_component_axis():
    keys = np.array([0, 1, 0])
    values = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    g = build_grouping(keys, 2)
    np.testing.assert_array_equal(segment_sum(values, g), [[6, 8], [3, 4]])
    np.testing.assert_array_equal(segment_prod(values, g), [[5, 12], [3, 4]])
    loo = segment_loo_prod(values, g)
    np.testing.assert_array_equal(loo, [[5, 6], [1, 1], [1, 2]])


def test_expand_broadcasts_back_in_natural_order():
    keys = np.array([1, 0, 1, 2])
    g = build_grouping(keys, 3)
    np.testing.assert_array_equal(expand(np.array([10.0, 20.0, 30.0]), g),
                                  [20, 10, 20, 30])
