# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Every reduction runs in plain index order so results are bit-identical to
``brafl._pykernels``; keep the two files in lockstep.
"""
import numpy as np

from libc.math cimport INFINITY


cpdef double sqdist(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0, t
    with nogil:
        for i in range(n):
            t = a[i] - b[i]
            s += t * t
    return s


def sqdists_to(const double[:, ::1] X, const double[::1] c):
    cdef Py_ssize_t k, i, K = X.shape[0], d = X.shape[1]
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] o = out
    cdef double s, t
    with nogil:
        for k in range(K):
            s = 0.0
            for i in range(d):
                t = X[k, i] - c[i]
                s += t * t
            o[k] = s
    return out


def weighted_centroid(const double[:, ::1] X, const double[::1] w):
    """Return ``(sum_k w_k x_k / sum_k w_k, sum_k w_k)``; centroid is zeros if the total is not positive."""
    cdef Py_ssize_t k, i, K = X.shape[0], d = X.shape[1]
    cdef double total = 0.0, wk
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] o = out
    for k in range(K):
        total += w[k]
    if not total > 0.0:
        return out, total
    with nogil:
        for k in range(K):
            wk = w[k]
            for i in range(d):
                o[i] += wk * X[k, i]
        for i in range(d):
            o[i] = o[i] / total
    return out, total


def pairwise_sqdists(const double[:, ::1] X):
    cdef Py_ssize_t p, q, i, K = X.shape[0], d = X.shape[1]
    out = np.zeros((K, K), dtype=np.float64)
    cdef double[:, ::1] D = out
    cdef double s, t
    with nogil:
        for p in range(K):
            for q in range(p + 1, K):
                s = 0.0
                for i in range(d):
                    t = X[p, i] - X[q, i]
                    s += t * t
                D[p, q] = s
                D[q, p] = s
    return out


cdef inline bint _next_combination(Py_ssize_t[::1] c, Py_ssize_t n, Py_ssize_t K) noexcept nogil:
    cdef Py_ssize_t i = n - 1, j
    while i >= 0 and c[i] == K - n + i:
        i -= 1
    if i < 0:
        return False
    c[i] += 1
    for j in range(i + 1, n):
        c[j] = c[j - 1] + 1
    return True


cdef inline void _shifted_mean(const double[:, ::1] X, Py_ssize_t[::1] c, Py_ssize_t n,
                               double[::1] cen) noexcept nogil:
    cdef Py_ssize_t a, i, d = X.shape[1]
    cdef Py_ssize_t first = c[0]
    for i in range(d):
        cen[i] = 0.0
    for a in range(n):
        for i in range(d):
            cen[i] += X[c[a], i] - X[first, i]
    for i in range(d):
        cen[i] = X[first, i] + cen[i] / n


def shifted_mean(const double[:, ::1] X, idx):
    """Centroid of rows ``idx`` computed as ``x_first + sum(x_k - x_first) / n`` (exact for coincident rows)."""
    cdef Py_ssize_t[::1] c = np.ascontiguousarray(idx, dtype=np.intp)
    out = np.empty(X.shape[1], dtype=np.float64)
    cdef double[::1] cen = out
    _shifted_mean(X, c, c.shape[0], cen)
    return out


def best_subset(const double[:, ::1] D, Py_ssize_t n):
    """Lexicographically first size-``n`` subset minimising the sum of its pairwise squared distances.

    Returns ``(indices, pair_sum, subsets_visited)``.
    """
    cdef Py_ssize_t K = D.shape[0], a, b, visited = 0
    cdef Py_ssize_t[::1] c = np.arange(n, dtype=np.intp)
    best = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] bst = best
    cdef double s, best_s = INFINITY
    cdef bint more = True
    with nogil:
        while more:
            s = 0.0
            for a in range(n):
                for b in range(a + 1, n):
                    s += D[c[a], c[b]]
            if s < best_s:
                best_s = s
                for a in range(n):
                    bst[a] = c[a]
            visited += 1
            more = _next_combination(c, n, K)
    return best, best_s, visited


def subset_bound(const double[:, ::1] X, const double[::1] agg, Py_ssize_t n, double scale):
    """Worst ratio ``||agg - mean_B||^2 / (scale * sum_{k in B} ||x_k - mean_B||^2)`` over all size-``n`` subsets B.

    ``0/0`` counts as ratio 0 and ``x/0`` with x > 0 as infinity.
    Returns ``(worst_ratio, worst_subset, lhs, rhs_sum, subsets_visited)``.
    """
    cdef Py_ssize_t K = X.shape[0], d = X.shape[1], a, i, visited = 0
    cdef Py_ssize_t[::1] c = np.arange(n, dtype=np.intp)
    worst = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] wst = worst
    cen_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] cen = cen_arr
    cdef double lhs, rhs, sk, t, ratio
    cdef double worst_ratio = -1.0, worst_lhs = 0.0, worst_rhs = 0.0
    cdef bint more = True
    with nogil:
        while more:
            _shifted_mean(X, c, n, cen)
            lhs = 0.0
            for i in range(d):
                t = agg[i] - cen[i]
                lhs += t * t
            rhs = 0.0
            for a in range(n):
                sk = 0.0
                for i in range(d):
                    t = X[c[a], i] - cen[i]
                    sk += t * t
                rhs += sk
            if rhs > 0.0:
                ratio = lhs / (scale * rhs)
            elif lhs > 0.0:
                ratio = INFINITY
            else:
                ratio = 0.0
            if ratio > worst_ratio:
                worst_ratio = ratio
                worst_lhs = lhs
                worst_rhs = rhs
                for a in range(n):
                    wst[a] = c[a]
            visited += 1
            more = _next_combination(c, n, K)
    return worst_ratio, worst, worst_lhs, worst_rhs, visited
