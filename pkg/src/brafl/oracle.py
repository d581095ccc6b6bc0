"""Exact ground truth for the subset-trimmed mean and its (M, kappa) robustness bound.

``brute_force_subset`` enumerates every subset of size K - M and returns the
one whose points have the smallest sum of squared distances to their own
centroid. ``check_robust_bound`` verifies, for every subset B of the same
size, that an aggregate lies within ``kappa/(K-M)`` times B's scatter of B's
centroid. Both refuse instances with more than ``MAX_SUBSETS`` subsets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .core import stack_updates

MAX_SUBSETS = 1_000_000
RATIO_SLACK = 1e-9


class EnumerationTooLarge(ValueError):
    pass


@dataclass
class SubsetSolution:
    subset: tuple[int, ...]
    centroid: np.ndarray
    objective: float


@dataclass
class RobustnessReport:
    kappa: float
    worst_ratio: float
    satisfied: bool
    worst_subset: tuple[int, ...] = ()
    subsets_checked: int = 0


def _matrix(updates) -> np.ndarray:
    if isinstance(updates, np.ndarray):
        return np.ascontiguousarray(updates if updates.ndim == 2 else updates[:, None], dtype=np.float64)
    return stack_updates(updates)


def _guard(K: int, M: int) -> None:
    if not 0 <= M or not 2 * M < K:
        raise ValueError(f"requires 0 <= M < K/2, got K={K}, M={M}")
    n = math.comb(K, K - M)
    if n > MAX_SUBSETS:
        raise EnumerationTooLarge(
            f"C({K}, {K - M}) = {n} subsets exceeds the {MAX_SUBSETS} guard; use a smaller K or M"
        )


def subset_objective(X: np.ndarray, subset) -> float:
    """Sum of squared distances of the subset's points to their centroid."""
    idx = np.asarray(subset, dtype=np.intp)
    cen = kernels.shifted_mean(X, idx)
    r = kernels.sqdists_to(np.ascontiguousarray(X[idx]), cen)
    total = 0.0
    for v in r:
        total += float(v)
    return total


def brute_force_subset(updates, M: int) -> SubsetSolution:
    """Exhaustive minimiser over subsets of size K - M (ties -> lexicographically smallest).

    Subsets are ranked by ``sum_{i<j in S} ||x_i - x_j||^2``, which equals
    ``|S|`` times the objective and needs no centroid per subset.
    """
    X = _matrix(updates)
    K = X.shape[0]
    _guard(K, M)
    n = K - M
    D = kernels.pairwise_sqdists(X)
    best, _, _ = kernels.best_subset(D, n)
    subset = tuple(int(i) for i in best)
    return SubsetSolution(subset, kernels.shifted_mean(X, best), subset_objective(X, best))


def robustness_kappa(K: int, M: int) -> float:
    if not 0 <= M or not 2 * M < K:
        raise ValueError(f"requires M < K/2, got K={K}, M={M}")
    return 4.0 * (1.0 + M / (K - 2 * M))


def check_robust_bound(aggregate, updates, M: int) -> RobustnessReport:
    """Worst ratio of ``||agg - mean_B||^2`` to ``kappa/(K-M) * sum_B ||x_k - mean_B||^2`` over all B.

    All-coincident subsets give 0 <= 0, which counts as satisfied (ratio 0).
    """
    X = _matrix(updates)
    K = X.shape[0]
    _guard(K, M)
    kappa = robustness_kappa(K, M)
    agg = np.ascontiguousarray(aggregate, dtype=np.float64).reshape(-1)
    if agg.shape[0] != X.shape[1]:
        raise ValueError(f"aggregate dim {agg.shape[0]} != update dim {X.shape[1]}")
    ratio, worst, _, _, visited = kernels.subset_bound(X, agg, K - M, kappa / (K - M))
    return RobustnessReport(
        kappa=kappa,
        worst_ratio=ratio,
        satisfied=ratio <= 1.0 + RATIO_SLACK,
        worst_subset=tuple(int(i) for i in worst),
        subsets_checked=visited,
    )


def jensen_gap(updates, S, B) -> float:
    """Smallest slack of ``2||x_k - mean_S||^2 + 2||x_k - mean_B||^2 - ||mean_S - mean_B||^2`` over k in B.

    Nonnegative by the parallelogram inequality; exposed as a diagnostic.
    """
    X = _matrix(updates)
    mS = kernels.shifted_mean(X, np.asarray(S, dtype=np.intp))
    mB = kernels.shifted_mean(X, np.asarray(B, dtype=np.intp))
    gap = kernels.sqdist(mS, mB)
    rows = np.ascontiguousarray(X[list(B)])
    slack = 2 * kernels.sqdists_to(rows, mS) + 2 * kernels.sqdists_to(rows, mB) - gap
    return float(slack.min())


def pi_threshold_subset(pi, threshold: float = 0.5) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(np.asarray(pi) >= threshold))
