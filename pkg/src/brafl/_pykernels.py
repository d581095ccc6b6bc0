"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

Reductions use ``np.cumsum`` (strictly sequential) instead of ``np.sum``
(pairwise), so every result matches the compiled version bit for bit.
"""
from __future__ import annotations

from itertools import combinations, islice

import numpy as np

_CHUNK = 4096


def _seqsum_last(a: np.ndarray) -> np.ndarray:
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1])
    return np.cumsum(a, axis=-1)[..., -1]


def sqdist(a: np.ndarray, b: np.ndarray) -> float:
    t = a - b
    return float(_seqsum_last(t * t))


def sqdists_to(X: np.ndarray, c: np.ndarray) -> np.ndarray:
    t = X - c
    return _seqsum_last(t * t)


def weighted_centroid(X: np.ndarray, w: np.ndarray):
    total = 0.0
    for wk in w:
        total += float(wk)
    out = np.zeros(X.shape[1])
    if not total > 0.0:
        return out, total
    for k in range(X.shape[0]):
        out += w[k] * X[k]
    return out / total, total


def pairwise_sqdists(X: np.ndarray) -> np.ndarray:
    K = X.shape[0]
    D = np.zeros((K, K))
    for p in range(K - 1):
        t = X[p + 1:] - X[p]
        row = _seqsum_last(t * t)
        D[p, p + 1:] = row
        D[p + 1:, p] = row
    return D


def _combination_chunks(K: int, n: int):
    it = combinations(range(K), n)
    while True:
        block = list(islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp).reshape(len(block), n)


def _shifted_means(X: np.ndarray, combos: np.ndarray) -> np.ndarray:
    first = X[combos[:, 0]]
    deltas = X[combos] - first[:, None, :]
    # sequential over subset members, matching the compiled accumulation
    acc = np.cumsum(deltas, axis=1)[:, -1, :]
    return first + acc / combos.shape[1]


def shifted_mean(X: np.ndarray, idx) -> np.ndarray:
    combos = np.asarray(idx, dtype=np.intp).reshape(1, -1)
    return _shifted_means(X, combos)[0]


def best_subset(D: np.ndarray, n: int):
    K = D.shape[0]
    pa, pb = (np.array(v, dtype=np.intp) for v in zip(*combinations(range(n), 2))) if n > 1 else (
        np.zeros(0, dtype=np.intp),
        np.zeros(0, dtype=np.intp),
    )
    best = np.arange(n, dtype=np.intp)
    best_s = np.inf
    visited = 0
    for combos in _combination_chunks(K, n):
        sums = _seqsum_last(D[combos[:, pa], combos[:, pb]])
        j = int(np.argmin(sums))
        if sums[j] < best_s:
            best_s = float(sums[j])
            best = combos[j].copy()
        visited += combos.shape[0]
    return best, best_s, visited


def subset_bound(X: np.ndarray, agg: np.ndarray, n: int, scale: float):
    K = X.shape[0]
    worst_ratio, worst, worst_lhs, worst_rhs = -1.0, np.arange(n, dtype=np.intp), 0.0, 0.0
    visited = 0
    for combos in _combination_chunks(K, n):
        cen = _shifted_means(X, combos)
        t = agg[None, :] - cen
        lhs = _seqsum_last(t * t)
        r = X[combos] - cen[:, None, :]
        rhs = _seqsum_last(_seqsum_last(r * r))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0.0, lhs / (scale * rhs), np.where(lhs > 0.0, np.inf, 0.0))
        j = int(np.argmax(ratio))
        if ratio[j] > worst_ratio:
            worst_ratio = float(ratio[j])
            worst = combos[j].copy()
            worst_lhs, worst_rhs = float(lhs[j]), float(rhs[j])
        visited += combos.shape[0]
    return worst_ratio, worst, worst_lhs, worst_rhs, visited
