"""Independent, deliberately slow reference implementations used as test oracles."""
import itertools
import math

import numpy as np


def sort_median(X):
    X = np.asarray(X, dtype=float)
    K = X.shape[0]
    out = []
    for j in range(X.shape[1]):
        col = sorted(X[:, j])
        out.append(col[K // 2] if K % 2 else (col[K // 2 - 1] + col[K // 2]) / 2)
    return np.array(out)


def sort_trim(X, beta):
    X = np.asarray(X, dtype=float)
    K = X.shape[0]
    m = math.floor(beta * K)
    out = []
    for j in range(X.shape[1]):
        kept = sorted(X[:, j])[m:K - m]
        total = 0.0
        for v in kept:
            total += v
        out.append(total / len(kept))
    return np.array(out)


def krum_scores(X, n_neighbors):
    X = np.asarray(X, dtype=float)
    K, d = X.shape
    scores = []
    for i in range(K):
        dists = []
        for j in range(K):
            if j != i:
                s = 0.0
                for c in range(d):
                    t = float(X[i, c] - X[j, c])
                    s += t * t
                dists.append(s)
        dists.sort()
        total = 0.0
        for v in dists[:n_neighbors]:
            total += v
        scores.append(total)
    return np.array(scores)


def subset_search(X, M):
    """(objective, subset) minimising the within-subset sum of squares, lexicographic ties."""
    X = np.asarray(X, dtype=float)
    K = X.shape[0]
    best = None
    for S in itertools.combinations(range(K), K - M):
        c = X[list(S)].mean(axis=0)
        obj = math.fsum(((X[list(S)] - c) ** 2).sum(axis=1))
        if best is None or obj < best[0] - 1e-12 * max(1.0, best[0]):
            best = (obj, S)
    return best


def bound_ratio(agg, X, M):
    K = X.shape[0]
    kappa = 4 * (1 + M / (K - 2 * M))
    worst = 0.0
    for B in itertools.combinations(range(K), K - M):
        mB = X[list(B)].mean(axis=0)
        lhs = float(((agg - mB) ** 2).sum())
        rhs = kappa / (K - M) * float(((X[list(B)] - mB) ** 2).sum())
        if rhs == 0:
            r = 0.0 if lhs == 0 else math.inf
        else:
            r = lhs / rhs
        worst = max(worst, r)
    return worst


def geomed_objective(X, z):
    return float(np.sqrt(((np.asarray(X) - z) ** 2).sum(axis=1)).sum())
