"""Bayesian robust aggregation (EM-style coordinate ascent on the ELBO).

Each client k carries a posterior probability ``pi_k`` of being benign. One
iteration re-estimates the contamination level ``eps`` from ``pi``, refreshes
``pi`` from each update's Gaussian density around the current mean, then
recomputes the ``pi``-weighted mean and variance. Every step maximises the
ELBO in its own block of variables, so the ELBO never decreases.

Departures from the textbook loop, all to keep it adaptive and finite:

* ``pi`` starts at 0.5 rather than 1; all-ones is a fixed point of the
  posterior update (the prior odds factor is zero) and would reduce to FedAvg.
* ``eps`` is clamped to ``[1/(2K), 0.5]``.
* ``sigma2`` is floored at ``sigma2_floor * (1 + mean ||w_k||^2)``.
* posteriors are computed as a logistic of log-odds so far outliers don't
  underflow the density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .core import AggregationResult, ClientUpdate, stack_updates

LOG_2PI = math.log(2.0 * math.pi)
_PI_MIN = np.finfo(np.float64).tiny
_PI_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class BraSettings:
    max_iterations: int = 100
    pi_tolerance: float = 1e-8
    sigma2_floor: float = 1e-12
    epsilon_clamp: tuple[float, float] | None = None  # None -> (1/(2K), 0.5)
    pi_init: float = 0.5

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.pi_tolerance > 0:
            raise ValueError("pi_tolerance must be positive")
        if not self.sigma2_floor > 0:
            raise ValueError("sigma2_floor must be positive")
        if not 0.0 < self.pi_init < 1.0:
            raise ValueError("pi_init must lie in (0, 1)")
        if self.epsilon_clamp is not None:
            lo, hi = self.epsilon_clamp
            if not 0.0 < lo < hi <= 0.5:
                raise ValueError("epsilon_clamp must satisfy 0 < lo < hi <= 0.5")

    def clamp_bounds(self, K: int) -> tuple[float, float]:
        if self.epsilon_clamp is not None:
            return self.epsilon_clamp
        return 1.0 / (2.0 * K), 0.5

    def floor_for(self, X: np.ndarray) -> float:
        """Variance floor scaled to the updates' magnitude."""
        norms = kernels.sqdists_to(X, np.zeros(X.shape[1]))
        return self.sigma2_floor * (1.0 + float(np.mean(norms)))


@dataclass
class BraIteration:
    elbo: float
    epsilon: float
    sigma2: float
    pi: np.ndarray
    epsilon_clamped: bool
    sigma2_floored: bool


@dataclass
class BraTrace:
    """Iteration 0 is the initial state; iteration i > 0 is the state after i full sweeps."""

    records: list[BraIteration] = field(default_factory=list)

    @property
    def elbos(self) -> np.ndarray:
        return np.array([r.elbo for r in self.records])

    def __len__(self) -> int:
        return len(self.records)


def _as_matrix(updates) -> np.ndarray:
    if isinstance(updates, np.ndarray):
        X = updates.reshape(updates.shape[0], -1) if updates.ndim != 2 else updates
        return np.ascontiguousarray(X, dtype=np.float64)
    return stack_updates(updates)


def gaussian_loglik(residual2, sigma2: float, floor: float = 0.0):
    """Log-density of a scalar Gaussian residual: ``-(r/sigma2 + ln(2 pi sigma2)) / 2``.

    ``residual2`` is the squared Euclidean distance to the mean, so the density
    has no dependence on the dimension. Works elementwise on arrays.
    """
    if not sigma2 > 0 or sigma2 < floor:
        raise ValueError(f"sigma2={sigma2!r} is below the floor {floor!r}; clamp before evaluating")
    return -0.5 * (np.asarray(residual2, dtype=np.float64) / sigma2 + (LOG_2PI + math.log(sigma2)))


def estimate_epsilon(pi) -> float:
    """Empirical-Bayes contamination level ``1 - mean(pi)`` (unclamped)."""
    p = np.asarray(pi, dtype=np.float64)
    if p.size == 0:
        raise ValueError("cannot estimate epsilon from an empty pi")
    total = 0.0
    for v in p:
        total += float(v)
    return 1.0 - total / p.size


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _PI_MIN, _PI_MAX)


def posterior(residual2, sigma2: float, epsilon: float) -> np.ndarray:
    """Benign posterior ``1 / (1 + eps/(1-eps) / p(w_k))`` evaluated as a logistic of the log-odds.

    ``epsilon = 0`` gives all ones: the degenerate fixed point the clamp avoids.
    """
    r = np.atleast_1d(np.asarray(residual2, dtype=np.float64))
    if epsilon <= 0.0:
        return np.ones_like(r)
    if epsilon >= 1.0:
        return np.zeros_like(r)
    return _logistic(gaussian_loglik(r, sigma2) + math.log((1.0 - epsilon) / epsilon))



def _clamped_epsilon(pi: np.ndarray, settings: BraSettings) -> tuple[float, bool]:
    lo, hi = settings.clamp_bounds(pi.shape[0])
    raw = estimate_epsilon(pi)
    eps = min(max(raw, lo), hi)
    return eps, eps != raw


def update_posteriors(updates, mean, sigma2: float, pi_old, settings: BraSettings | None = None) -> np.ndarray:
    """One fixed-point update of the benign posteriors for given mean and variance."""
    settings = settings or BraSettings()
    X = _as_matrix(updates)
    pi_old = np.asarray(pi_old, dtype=np.float64)
    if pi_old.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} updates but {pi_old.shape[0]} posteriors")
    if np.any((pi_old < 0) | (pi_old > 1)):
        raise ValueError("pi_old must lie in [0, 1]")
    floor = settings.floor_for(X)
    if sigma2 < floor:
        raise ValueError(f"sigma2={sigma2!r} is below the floor {floor!r}")
    eps, _ = _clamped_epsilon(pi_old, settings)
    r = kernels.sqdists_to(X, np.ascontiguousarray(mean, dtype=np.float64))
    return posterior(r, sigma2, eps)


def _location_scale(X: np.ndarray, pi: np.ndarray, floor: float) -> tuple[np.ndarray, float, np.ndarray, bool]:
    mean, total = kernels.weighted_centroid(X, pi)
    if not total > 0:
        raise ValueError("all clients rejected: sum of pi is zero")
    r = kernels.sqdists_to(X, mean)
    var, _ = kernels.weighted_centroid(np.ascontiguousarray(r[:, None]), pi)
    raw = float(var[0])
    return mean, max(floor, raw), r, raw < floor


def update_location_scale(updates, pi, settings: BraSettings | None = None) -> tuple[np.ndarray, float]:
    """Closed-form pi-weighted mean and variance (variance floored)."""
    settings = settings or BraSettings()
    X = _as_matrix(updates)
    mean, sigma2, _, _ = _location_scale(X, np.ascontiguousarray(pi, dtype=np.float64), settings.floor_for(X))
    return mean, sigma2


def _kl_terms(pi: np.ndarray, eps: float) -> np.ndarray:
    # 0 * ln 0 = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(pi > 0, pi * np.log(pi / (1.0 - eps)), 0.0)
        b = np.where(pi < 1, (1.0 - pi) * np.log((1.0 - pi) / eps), 0.0)
    return a + b


def elbo_terms(residual2, sigma2: float, pi, epsilon: float) -> np.ndarray:
    """Per-client ELBO contributions ``pi_k * loglik_k - KL_k``."""
    pi = np.asarray(pi, dtype=np.float64)
    return pi * gaussian_loglik(residual2, sigma2) - _kl_terms(pi, epsilon)


def elbo(updates, mean, sigma2: float, pi, epsilon: float) -> float:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    X = _as_matrix(updates)
    r = kernels.sqdists_to(X, np.ascontiguousarray(mean, dtype=np.float64))
    return _sum(elbo_terms(r, sigma2, pi, epsilon))


def _sum(v: np.ndarray) -> float:
    total = 0.0
    for x in v:
        total += float(x)
    return total


def aggregate_bra(
    updates: Sequence[ClientUpdate] | np.ndarray,
    settings: BraSettings | None = None,
    *,
    return_trace: bool = False,
) -> AggregationResult:
    """Run the EM loop to convergence and return the robust mean with diagnostics.

    With ``return_trace=True`` the per-iteration ELBO, epsilon, sigma2 and pi
    are stored in ``result.diagnostics["trace"]`` as a :class:`BraTrace`.
    """
    settings = settings or BraSettings()
    X = _as_matrix(updates)
    K = X.shape[0]
    if K < 2:
        raise ValueError(f"BRA needs at least 2 client updates, got {K}")
    floor = settings.floor_for(X)
    trace = BraTrace() if return_trace else None

    pi = np.full(K, settings.pi_init)
    mean, sigma2, r, floored = _location_scale(X, np.ones(K), floor)
    eps, clamped = _clamped_epsilon(pi, settings)
    value = _sum(elbo_terms(r, sigma2, pi, eps))
    if trace is not None:
        trace.records.append(BraIteration(value, eps, sigma2, pi.copy(), clamped, floored))

    converged = False
    it = 0
    while it < settings.max_iterations:
        it += 1
        eps, clamped = _clamped_epsilon(pi, settings)
        pi_new = posterior(r, sigma2, eps)
        mean, sigma2, r, floored = _location_scale(X, pi_new, floor)
        delta = float(np.max(np.abs(pi_new - pi)))
        pi = pi_new
        value = _sum(elbo_terms(r, sigma2, pi, eps))
        if trace is not None:
            trace.records.append(BraIteration(value, eps, sigma2, pi.copy(), clamped, floored))
        if delta < settings.pi_tolerance:
            converged = True
            break

    eps_hat = estimate_epsilon(pi)
    lo, hi = settings.clamp_bounds(K)
    diagnostics = {"epsilon_clamped": min(max(eps_hat, lo), hi), "sigma2_floor": floor}
    if trace is not None:
        diagnostics["trace"] = trace
    return AggregationResult(
        mean=mean,
        sigma2=sigma2,
        pi=pi,
        epsilon_hat=eps_hat,
        iterations=it,
        elbo=value,
        converged=converged,
        diagnostics=diagnostics,
    )
