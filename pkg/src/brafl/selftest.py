"""Fast property checks runnable from an installed package (``brafl selftest``)."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ._backend import BACKEND, available_backends
from .baselines import aggregate_median, aggregate_trimmed_mean, geomed_subgradient_norm, krum_scores, weiszfeld
from .bra import aggregate_bra
from .core import keyed_generator
from .data import Dataset
from .experiment import random_instance
from .model import LogisticModel
from .oracle import brute_force_subset, check_robust_bound


def _elbo_monotone(rng) -> bool:
    K, d = int(rng.integers(4, 30)), int(rng.integers(1, 16))
    X = random_instance(rng, K, int(rng.integers(0, (K + 1) // 2)), d) * 0.05
    tr = aggregate_bra(X, return_trace=True).diagnostics["trace"].records
    for a, b in zip(tr, tr[1:]):
        if not (b.epsilon_clamped or b.sigma2_floored) and b.elbo < a.elbo - 1e-9 * abs(a.elbo):
            return False
    return True


def _certificate(rng) -> bool:
    K = int(rng.integers(4, 9))
    M = int(rng.integers(0, (K + 1) // 2))
    X = random_instance(rng, K, M, int(rng.integers(1, 4)))
    return check_robust_bound(brute_force_subset(X, M).centroid, X, M).satisfied


def _baselines(rng) -> bool:
    K, d = int(rng.integers(3, 12)), int(rng.integers(1, 6))
    X = rng.standard_normal((K, d))
    S = np.sort(X, axis=0)
    med = (S[(K - 1) // 2] + S[K // 2]) / 2
    m = int(0.2 * K)
    ok = np.array_equal(aggregate_median(X), med)
    ok &= np.allclose(aggregate_trimmed_mean(X, 0.2), S[m:K - m].mean(axis=0), rtol=0, atol=1e-12)
    ok &= geomed_subgradient_norm(X, weiszfeld(X).point) <= 1e-6
    scores = krum_scores(X, max(1, K - 3))
    ok &= bool(np.all(np.isfinite(scores)))
    return bool(ok)


def _gradient(rng) -> bool:
    Y, d, n = int(rng.integers(2, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 8))
    model = LogisticModel(Y, d)
    p = rng.standard_normal(model.size)
    data = Dataset(rng.standard_normal((n, d)), rng.integers(0, Y, n), Y)
    _, g = model.loss_and_grad(p, data.features, data.labels, 1e-2)
    fd = np.empty_like(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = 1e-5
        fd[i] = (model.loss_and_grad(p + e, data.features, data.labels, 1e-2)[0]
                 - model.loss_and_grad(p - e, data.features, data.labels, 1e-2)[0]) / 2e-5
    return float(np.linalg.norm(g - fd)) <= 1e-5 * max(1.0, float(np.linalg.norm(fd)))


def _backend_parity(rng) -> bool:
    b = available_backends()
    if len(b) < 2:
        return True
    X = rng.standard_normal((7, 5))
    w = rng.random(7)
    D = b["cython"].pairwise_sqdists(X)
    ok = np.array_equal(D, b["python"].pairwise_sqdists(X))
    ok &= np.array_equal(b["cython"].weighted_centroid(X, w)[0], b["python"].weighted_centroid(X, w)[0])
    ok &= np.array_equal(b["cython"].best_subset(D, 4)[0], b["python"].best_subset(D, 4)[0])
    return bool(ok)


CHECKS: dict[str, tuple[Callable, int]] = {
    "elbo_monotone": (_elbo_monotone, 100),
    "robustness_certificate": (_certificate, 50),
    "baseline_oracles": (_baselines, 50),
    "gradient_finite_diff": (_gradient, 20),
    "backend_parity": (_backend_parity, 10),
}


def run_selftest(seed: int = 0, echo=print) -> bool:
    echo(f"kernel backend: {BACKEND}")
    all_ok = True
    for j, (name, (check, n)) in enumerate(CHECKS.items()):
        failures = [i for i in range(n) if not check(keyed_generator(seed, j, i))]
        ok = not failures
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'} {name} ({n - len(failures)}/{n})")
    return all_ok
