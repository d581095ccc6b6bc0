"""Shared value types and the two primitive reductions everything else uses.

Parameter vectors are plain 1-D ``float64`` numpy arrays; ``as_param_vector``
is the validating constructor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels


class DimensionMismatch(ValueError):
    pass


def as_param_vector(values) -> np.ndarray:
    """Validate and copy ``values`` into a contiguous float64 vector."""
    v = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    if v.size == 0:
        raise ValueError("parameter vector must have dim > 0")
    if not np.all(np.isfinite(v)):
        raise ValueError("parameter vector contains NaN or Inf")
    return v


@dataclass(frozen=True)
class ClientUpdate:
    client_id: int
    params: np.ndarray
    sample_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "params", as_param_vector(self.params))
        if self.sample_count < 1:
            raise ValueError(f"client {self.client_id}: sample_count must be positive")

    @property
    def dim(self) -> int:
        return self.params.shape[0]


@dataclass
class AggregationResult:
    """Aggregate plus diagnostics.

    ``epsilon_hat`` is the unclamped ``1 - mean(pi)``; the clamped value the
    last iteration actually used is kept in ``diagnostics["epsilon_clamped"]``.
    Non-BRA rules report ``pi`` all ones and the unweighted variance as ``sigma2``.
    """

    mean: np.ndarray
    sigma2: float
    pi: np.ndarray
    epsilon_hat: float
    iterations: int = 0
    elbo: float = float("nan")
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Rng:
    """Determinism contract: the same ``(seed, stream_id)`` yields the same draws everywhere.

    Backed by Philox, which is counter based and platform independent.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return keyed_generator(self.seed, self.stream_id)


def keyed_generator(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the stream ``(seed, *keys)``; order of creation is irrelevant."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def stack_updates(updates: Sequence[ClientUpdate]) -> np.ndarray:
    """Rows in client_id order; checks ids are 0..K-1 and dims agree."""
    if not updates:
        raise ValueError("no client updates")
    ordered = sorted(updates, key=lambda u: u.client_id)
    ids = [u.client_id for u in ordered]
    if ids != list(range(len(ordered))):
        raise ValueError(f"client ids must be distinct and contiguous 0..K-1, got {ids}")
    dims = {u.dim for u in ordered}
    if len(dims) != 1:
        raise DimensionMismatch(f"client updates have differing dims {sorted(dims)}")
    return np.ascontiguousarray(np.stack([u.params for u in ordered]))


def make_updates(rows, sample_counts=None) -> list[ClientUpdate]:
    """Convenience: wrap a (K, d) array-like into ClientUpdates with ids 0..K-1."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    counts = [1] * X.shape[0] if sample_counts is None else list(sample_counts)
    return [ClientUpdate(k, X[k], int(counts[k])) for k in range(X.shape[0])]


def squared_distance(a, b) -> float:
    """Sum of squared coordinate differences, accumulated in index order."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return kernels.sqdist(a, b)


def weighted_centroid(updates: Sequence[ClientUpdate] | np.ndarray, weights) -> np.ndarray:
    X = updates if isinstance(updates, np.ndarray) else stack_updates(updates)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} updates but {w.shape[0]} weights")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    out, total = kernels.weighted_centroid(np.ascontiguousarray(X), w)
    if not total > 0:
        raise ValueError("degenerate weights: sum of weights must be positive")
    return out
