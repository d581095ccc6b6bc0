import numpy as np
import pytest

import naive
from brafl.baselines import (BaselineSpec, aggregate_baseline, aggregate_fedavg, aggregate_geometric_median,
                             aggregate_median, aggregate_multi_krum, aggregate_trimmed_mean, geomed_subgradient_norm,
                             krum_scores, multi_krum_select, trim_count, weiszfeld)
from brafl.core import make_updates


def test_fedavg_examples():
    np.testing.assert_array_equal(aggregate_fedavg(make_updates([[0], [2]])), [1.0])
    np.testing.assert_array_equal(aggregate_fedavg(make_updates([[0], [4]], sample_counts=[1, 3])), [3.0])
    v = [0.3, -1.7]
    np.testing.assert_allclose(aggregate_fedavg(make_updates([v] * 5)), v, rtol=1e-15)


def test_median_examples(rng):
    np.testing.assert_array_equal(aggregate_median(np.array([[1, 5], [2, 6], [3, 7]], float)), [2, 6])
    np.testing.assert_array_equal(aggregate_median(np.array([[0], [1], [2], [100]], float)), [1.5])
    X = rng.standard_normal((7, 3))
    np.testing.assert_array_equal(aggregate_median(X), naive.sort_median(X))


def test_trimmed_mean_examples(rng):
    np.testing.assert_array_equal(aggregate_trimmed_mean(np.array([[0], [1], [2], [100]], float), 0.25), [1.5])
    X = rng.standard_normal((9, 4))
    np.testing.assert_allclose(aggregate_trimmed_mean(X, 0.0), X.mean(0), rtol=0, atol=1e-15)
    X = rng.standard_normal((10, 5))
    np.testing.assert_array_equal(aggregate_trimmed_mean(X, 0.4), naive.sort_trim(X, 0.4))


def test_trimmed_mean_limits(rng):
    X = rng.standard_normal((7, 3))
    np.testing.assert_array_equal(aggregate_trimmed_mean(X, 3 / 7), aggregate_median(X))
    assert trim_count(20, 0.2) == 4
    with pytest.raises(ValueError):
        aggregate_trimmed_mean(np.zeros((4, 1)), 0.5)


def test_geometric_median_examples(rng):
    np.testing.assert_array_equal(aggregate_geometric_median(np.array([[0.0], [1.0], [10.0]])), [1.0])
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    np.testing.assert_allclose(aggregate_geometric_median(tri), tri.mean(0), atol=1e-6)
    X = rng.standard_normal((6, 2))
    z = aggregate_geometric_median(X)
    best = naive.geomed_objective(X, z)
    probes = z + 1e-3 * rng.standard_normal((10_000, 2))
    assert all(best <= naive.geomed_objective(X, p) + 1e-12 for p in probes)


def test_geometric_median_beats_mean_and_median(rng):
    for _ in range(20):
        X = rng.standard_normal((int(rng.integers(3, 15)), int(rng.integers(1, 6))))
        X[0] *= 50
        res = weiszfeld(X)
        obj = naive.geomed_objective(X, res.point)
        assert res.converged and res.subgradient_norm <= 1e-6
        for ref in (X.mean(0), naive.sort_median(X)):
            assert obj <= naive.geomed_objective(X, ref) * (1 + 1e-8)


def test_geometric_median_on_data_point():
    X = np.array([[0.0, 0.0]] * 3 + [[1.0, 0.0], [0.0, 1.0]])
    res = weiszfeld(X)
    np.testing.assert_array_equal(res.point, [0.0, 0.0])
    assert geomed_subgradient_norm(X, res.point) == 0.0


def test_multi_krum_examples(rng):
    X = np.array([[0.0], [0.1], [0.2], [10.0]])
    sel, scores = multi_krum_select(X, 3)
    assert sel.tolist() == [0, 1, 2]
    np.testing.assert_allclose(aggregate_multi_krum(X, 3), [0.1], atol=1e-15)
    np.testing.assert_array_equal(scores, naive.krum_scores(X, 1))
    same = np.tile([[2.0, -1.0]], (5, 1))
    np.testing.assert_array_equal(aggregate_multi_krum(same, 3), [2.0, -1.0])
    X = rng.standard_normal((20, 6))
    np.testing.assert_array_equal(krum_scores(X, 14), naive.krum_scores(X, 14))


def test_multi_krum_validation():
    with pytest.raises(ValueError):
        aggregate_multi_krum(np.zeros((4, 1)), 5)
    with pytest.raises(ValueError, match="too small"):
        aggregate_multi_krum(np.zeros((4, 1)), 2)


def test_multi_krum_ties_prefer_low_ids():
    X = np.array([[0.0], [0.0], [0.0], [0.0], [5.0]])
    assert multi_krum_select(X, 3)[0].tolist() == [0, 1, 2]


@pytest.mark.parametrize("kind", ["median", "trimmed_mean", "geometric_median", "multi_krum"])
def test_permutation_invariance_and_translation(kind, rng):
    spec = BaselineSpec(kind, beta=0.2, krum_l=7)
    X = rng.standard_normal((10, 3))
    c = rng.standard_normal(3)
    perm = rng.permutation(10)
    a = aggregate_baseline(make_updates(X), spec).mean
    b = aggregate_baseline(make_updates(X[perm]), spec).mean
    t = aggregate_baseline(make_updates(X + c), spec).mean
    np.testing.assert_allclose(b, a, rtol=0, atol=1e-12)
    np.testing.assert_allclose(t, a + c, rtol=0, atol=1e-9)


def test_baseline_spec_validation():
    with pytest.raises(ValueError, match="beta required"):
        BaselineSpec("trimmed_mean")
    with pytest.raises(ValueError, match="krum_l required"):
        BaselineSpec("multi_krum")
    with pytest.raises(ValueError):
        BaselineSpec("mode")


def test_baseline_result_diagnostics(rng):
    X = rng.standard_normal((6, 2))
    res = aggregate_baseline(make_updates(X), BaselineSpec("median"))
    assert np.array_equal(res.pi, np.ones(6)) and res.epsilon_hat == 0.0
    assert res.sigma2 == pytest.approx(((X - X.mean(0)) ** 2).sum(1).mean())
