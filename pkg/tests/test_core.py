import math

import numpy as np
import pytest

from brafl.core import (ClientUpdate, DimensionMismatch, Rng, as_param_vector, keyed_generator, make_updates,
                        squared_distance, stack_updates, weighted_centroid)


def test_squared_distance_examples():
    assert squared_distance([0, 0], [0, 0]) == 0.0
    assert squared_distance([1, 2], [4, 6]) == 25.0
    assert abs(squared_distance([0.1] * 1000, [0.2] * 1000) - math.fsum([(0.1 - 0.2) ** 2] * 1000)) <= 1e-12


def test_squared_distance_symmetric(rng):
    a, b = rng.standard_normal(17), rng.standard_normal(17)
    assert squared_distance(a, b) == squared_distance(b, a)
    assert squared_distance(a, a) == 0.0


def test_squared_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatch, match="2.*3|3.*2"):
        squared_distance([1, 2], [1, 2, 3])


@pytest.mark.parametrize("rows, weights, expected", [
    ([[1], [3]], [1, 1], [2]),
    ([[1], [3]], [1, 0], [1]),
    ([[0], [1], [2]], [0.25, 0.5, 0.25], [1]),
])
def test_weighted_centroid_examples(rows, weights, expected):
    np.testing.assert_allclose(weighted_centroid(make_updates(rows), weights), expected, rtol=0, atol=1e-15)


def test_weighted_centroid_equal_weights_is_mean(rng):
    X = rng.standard_normal((9, 4))
    np.testing.assert_allclose(weighted_centroid(X, np.ones(9)), X.mean(axis=0), rtol=1e-14, atol=1e-15)


def test_weighted_centroid_degenerate():
    with pytest.raises(ValueError, match="degenerate weights"):
        weighted_centroid(make_updates([[1], [2]]), [0, 0])


def test_weighted_centroid_deterministic(rng):
    X, w = rng.standard_normal((30, 50)), rng.random(30)
    assert np.array_equal(weighted_centroid(X, w), weighted_centroid(X.copy(), w.copy()))


def test_param_vector_validation():
    with pytest.raises(ValueError):
        as_param_vector([])
    with pytest.raises(ValueError):
        as_param_vector([1.0, float("nan")])
    with pytest.raises(ValueError):
        ClientUpdate(0, [1.0], sample_count=0)


def test_stack_updates_checks_ids_and_dims():
    with pytest.raises(ValueError):
        stack_updates([ClientUpdate(0, [1.0]), ClientUpdate(2, [1.0])])
    with pytest.raises(DimensionMismatch):
        stack_updates([ClientUpdate(0, [1.0]), ClientUpdate(1, [1.0, 2.0])])
    X = stack_updates([ClientUpdate(1, [2.0]), ClientUpdate(0, [1.0])])
    assert X[:, 0].tolist() == [1.0, 2.0]


def test_rng_streams_reproducible():
    a = Rng(7, 3).generator().random(5)
    assert np.array_equal(a, Rng(7, 3).generator().random(5))
    assert not np.array_equal(a, Rng(7, 4).generator().random(5))
    assert np.array_equal(keyed_generator(1, 2, 3).random(4), keyed_generator(1, 2, 3).random(4))
