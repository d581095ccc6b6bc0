import math

import numpy as np
import pytest

from brafl.data import Dataset
from brafl.model import LogisticModel, evaluate_acc, evaluate_asr, model_loss_and_grad


def _batch(rng, n, d, Y):
    return Dataset(rng.standard_normal((n, d)), rng.integers(0, Y, n), Y)


def test_flatten_round_trip(rng):
    m = LogisticModel(4, 3)
    W, b = rng.standard_normal((4, 3)), rng.standard_normal(4)
    p = m.flatten(W, b)
    assert p.shape == (m.size,) and np.array_equal(p[:12], W.reshape(-1))
    W2, b2 = m.unflatten(p)
    assert np.array_equal(W2, W) and np.array_equal(b2, b)


def test_zero_params_give_log_y(rng):
    m = LogisticModel(5, 3)
    loss, _ = model_loss_and_grad(m, m.init_params(), _batch(rng, 7, 3, 5), 1e-4)
    assert loss == pytest.approx(math.log(5), abs=1e-15)


def test_gradient_finite_difference(rng):
    for _ in range(10):
        Y, d = int(rng.integers(2, 6)), int(rng.integers(1, 6))
        m = LogisticModel(Y, d)
        batch = _batch(rng, int(rng.integers(1, 10)), d, Y)
        p = rng.standard_normal(m.size)
        _, g = model_loss_and_grad(m, p, batch, 0.05)
        fd = np.array([(model_loss_and_grad(m, p + e, batch, 0.05)[0] - model_loss_and_grad(m, p - e, batch, 0.05)[0])
                       / 2e-5 for e in np.eye(m.size) * 1e-5])
        assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_bias_not_decayed(rng):
    m = LogisticModel(3, 2)
    batch = _batch(rng, 4, 2, 3)
    p = rng.standard_normal(m.size)
    _, g0 = model_loss_and_grad(m, p, batch, 0.0)
    _, g1 = model_loss_and_grad(m, p, batch, 0.3)
    W, _ = m.unflatten(p)
    np.testing.assert_allclose((g1 - g0)[:6], 0.3 * W.reshape(-1), atol=1e-15)
    np.testing.assert_array_equal((g1 - g0)[6:], 0.0)


def test_duplicated_batch_is_invariant(rng):
    m = LogisticModel(3, 4)
    batch = _batch(rng, 5, 4, 3)
    doubled = Dataset(np.vstack([batch.features] * 2), np.concatenate([batch.labels] * 2), 3)
    p = rng.standard_normal(m.size)
    a, b = model_loss_and_grad(m, p, batch, 1e-3), model_loss_and_grad(m, p, doubled, 1e-3)
    assert a[0] == pytest.approx(b[0], rel=1e-14)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-13, atol=1e-15)


def _constant_model(Y, d, cls):
    m = LogisticModel(Y, d)
    b = np.zeros(Y)
    b[cls] = 1.0
    return m, m.flatten(np.zeros((Y, d)), b)


def test_accuracy_and_asr(rng):
    Y = 4
    test = Dataset(rng.standard_normal((8, 2)), np.repeat(np.arange(Y), 2), Y)
    m, p = _constant_model(Y, 2, 1)
    assert evaluate_acc(m, p, test) == pytest.approx(1 / Y)
    m0 = LogisticModel(Y, 2)
    assert evaluate_acc(m0, m0.init_params(), Dataset(test.features, np.zeros(8, int), Y)) == 1.0
    trig = Dataset(rng.standard_normal((5, 2)), np.full(5, 3), Y)
    assert evaluate_asr(*_constant_model(Y, 2, 3), trig, 3) == 1.0
    assert evaluate_asr(*_constant_model(Y, 2, 0), trig, 3) == 0.0
