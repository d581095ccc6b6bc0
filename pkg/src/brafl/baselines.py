"""Comparison aggregation rules: FedAvg, coordinate median, trimmed mean,
geometric median (Weiszfeld) and Multi-Krum."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._backend import kernels
from .core import AggregationResult, ClientUpdate, stack_updates

KINDS = ("fedavg", "median", "trimmed_mean", "geometric_median", "multi_krum")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    beta: float | None = None
    krum_l: int | None = None
    geomed_tolerance: float = 1e-10
    geomed_max_iters: int = 1000

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {KINDS}")
        if self.kind == "trimmed_mean":
            if self.beta is None:
                raise ValueError("beta required for trimmed_mean")
            if not 0.0 <= self.beta < 0.5:
                raise ValueError("beta must lie in [0, 0.5)")
        if self.kind == "multi_krum":
            if self.krum_l is None:
                raise ValueError("krum_l required for multi_krum")
            if self.krum_l < 1:
                raise ValueError("krum_l must be positive")


def _matrix(updates) -> np.ndarray:
    if isinstance(updates, np.ndarray):
        return np.ascontiguousarray(updates if updates.ndim == 2 else updates[:, None], dtype=np.float64)
    return stack_updates(updates)


def aggregate_fedavg(updates: Sequence[ClientUpdate]) -> np.ndarray:
    """Sample-count weighted mean."""
    X = stack_updates(updates)
    counts = np.array([u.sample_count for u in sorted(updates, key=lambda u: u.client_id)], dtype=np.float64)
    out, _ = kernels.weighted_centroid(X, counts)
    return out


def aggregate_median(updates) -> np.ndarray:
    """Coordinate-wise median; the two middle order statistics are averaged for even K."""
    return np.median(_matrix(updates), axis=0)


def trim_count(K: int, beta: float) -> int:
    m = int(math.floor(beta * K + 1e-12))
    if K - 2 * m < 1:
        raise ValueError(f"trimmed mean with beta={beta} removes all {K} values")
    return m


def aggregate_trimmed_mean(updates, beta: float) -> np.ndarray:
    X = _matrix(updates)
    m = trim_count(X.shape[0], beta)
    kept = np.ascontiguousarray(np.sort(X, axis=0)[m:X.shape[0] - m])
    out, _ = kernels.weighted_centroid(kept, np.ones(kept.shape[0]))
    return out


@dataclass
class WeiszfeldResult:
    point: np.ndarray
    iterations: int
    converged: bool
    subgradient_norm: float


def _unit_sum(X: np.ndarray, z: np.ndarray, skip: int | None = None) -> np.ndarray:
    diff = z - X
    dist = np.sqrt(kernels.sqdists_to(X, z))
    keep = dist > 0
    if skip is not None:
        keep[skip] = False
    return (diff[keep] / dist[keep, None]).sum(axis=0)


def geomed_subgradient_norm(X: np.ndarray, z: np.ndarray) -> float:
    """Norm of the minimum-norm subgradient of ``sum_k ||x_k - z||`` at ``z``.

    Away from the data this is the gradient norm; at a data point x_j the
    subdifferential is ``g + B(0, m_j)`` (m_j = multiplicity), so the norm is
    ``max(0, ||g|| - m_j)``.
    """
    X = _matrix(X)
    z = np.ascontiguousarray(z, dtype=np.float64)
    dist = np.sqrt(kernels.sqdists_to(X, z))
    coincident = dist == 0
    g = _unit_sum(X, z)
    return max(0.0, float(np.linalg.norm(g)) - int(coincident.sum()))


def weiszfeld(X: np.ndarray, tolerance: float = 1e-10, max_iters: int = 1000) -> WeiszfeldResult:
    """Geometric median by Weiszfeld iteration.

    Data points are tested for optimality first (``||sum of unit vectors
    from the others|| <= multiplicity``), which settles medians that sit on a
    data point exactly, e.g. every odd-K 1-D case. Otherwise the classical
    iteration runs with 1e-12 added to each distance.
    """
    X = _matrix(X)
    K = X.shape[0]
    if K == 0:
        raise ValueError("no points")
    D = kernels.pairwise_sqdists(X)
    for j in range(K):
        others = D[j] > 0
        mult = K - int(others.sum())
        if not others.any():
            return WeiszfeldResult(X[j].copy(), 0, True, 0.0)
        g = ((X[j] - X[others]) / np.sqrt(D[j, others])[:, None]).sum(axis=0)
        if float(np.linalg.norm(g)) <= mult:
            return WeiszfeldResult(X[j].copy(), 0, True, max(0.0, float(np.linalg.norm(g)) - mult))

    z = X.mean(axis=0)
    best_z, best_g = z, geomed_subgradient_norm(X, z)
    it = 0
    while it < max_iters and best_g > tolerance:
        it += 1
        w = 1.0 / (np.sqrt(kernels.sqdists_to(X, z)) + 1e-12)
        z = (w[:, None] * X).sum(axis=0) / w.sum()
        g = geomed_subgradient_norm(X, z)
        if g < best_g:
            best_z, best_g = z, g
    return WeiszfeldResult(best_z, it, best_g <= tolerance, best_g)


def aggregate_geometric_median(updates, tolerance: float = 1e-10, max_iters: int = 1000) -> np.ndarray:
    return weiszfeld(_matrix(updates), tolerance, max_iters).point


def krum_scores(X: np.ndarray, n_neighbors: int, D: np.ndarray | None = None) -> np.ndarray:
    """Sum of each client's ``n_neighbors`` smallest squared distances to the others (ascending order)."""
    K = X.shape[0]
    if D is None:
        D = kernels.pairwise_sqdists(X)
    scores = np.empty(K)
    for i in range(K):
        nearest = np.sort(np.delete(D[i], i))[:n_neighbors]
        s = 0.0
        for v in nearest:
            s += float(v)
        scores[i] = s
    return scores


def multi_krum_select(updates, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(selected ids, scores)`` for Multi-Krum with ``f = K - L`` presumed Byzantine."""
    X = _matrix(updates)
    K = X.shape[0]
    if not 2 <= L <= K:
        raise ValueError(f"multi_krum needs 2 <= L <= K, got L={L}, K={K}")
    f = K - L
    n_neighbors = K - f - 2
    if n_neighbors < 1:
        raise ValueError(f"K={K} too small for multi_krum with f={f}: need K - f - 2 >= 1")
    scores = krum_scores(X, n_neighbors)
    order = np.argsort(scores, kind="stable")
    return np.sort(order[:L]), scores


def aggregate_multi_krum(updates, L: int) -> np.ndarray:
    X = _matrix(updates)
    selected, _ = multi_krum_select(X, L)
    out, _ = kernels.weighted_centroid(np.ascontiguousarray(X[selected]), np.ones(len(selected)))
    return out


def aggregate_baseline(updates: Sequence[ClientUpdate], spec: BaselineSpec) -> AggregationResult:
    """Dispatch on ``spec.kind`` and wrap the output with FedAvg-style diagnostics."""
    X = stack_updates(updates)
    K = X.shape[0]
    diagnostics: dict = {}
    if spec.kind == "fedavg":
        mean = aggregate_fedavg(updates)
    elif spec.kind == "median":
        mean = aggregate_median(X)
    elif spec.kind == "trimmed_mean":
        mean = aggregate_trimmed_mean(X, spec.beta)
    elif spec.kind == "geometric_median":
        res = weiszfeld(X, spec.geomed_tolerance, spec.geomed_max_iters)
        mean = res.point
        diagnostics["weiszfeld"] = res
    else:
        selected, scores = multi_krum_select(X, spec.krum_l)
        mean, _ = kernels.weighted_centroid(np.ascontiguousarray(X[selected]), np.ones(len(selected)))
        diagnostics["selected"] = selected
        diagnostics["scores"] = scores
    centre, _ = kernels.weighted_centroid(X, np.ones(K))
    sigma2 = float(np.mean(kernels.sqdists_to(X, centre)))
    converged = diagnostics["weiszfeld"].converged if "weiszfeld" in diagnostics else True
    return AggregationResult(
        mean=mean, sigma2=sigma2, pi=np.ones(K), epsilon_hat=0.0, converged=converged, diagnostics=diagnostics
    )
