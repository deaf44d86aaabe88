"""Exact and closed-form checks on the limit theory.

Poisson approximation by factorial moments, Gaussian exceedance sums over
d-subsets, and goodness-of-fit distances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.special import comb, ndtr

from .core import CapExceeded, CovmaxError


@dataclass
class EnumerableEventSystem:
    """A finite probability space carrying ``s`` events.

    ``probs[k]`` is the probability of outcome ``k`` and ``bits[k, i]`` says
    whether event ``i`` occurs on it.
    """

    probs: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.bits = np.atleast_2d(np.asarray(self.bits, dtype=bool))
        if self.bits.shape[0] != self.probs.size:
            raise CovmaxError("need one bit-vector per outcome")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1) > 1e-12:
            raise CovmaxError("outcome probabilities must be nonnegative and sum to 1")

    @property
    def event_count(self) -> int:
        return self.bits.shape[1]

    @classmethod
    def independent(cls, p) -> "EnumerableEventSystem":
        """All ``2**s`` outcomes of independent events with probabilities ``p``."""
        p = np.asarray(p, dtype=np.float64)
        s = p.size
        bits = ((np.arange(2**s)[:, None] >> np.arange(s)) & 1).astype(bool)
        probs = np.prod(np.where(bits, p, 1 - p), axis=1)
        return cls(probs, bits)


def _falling(w: np.ndarray, d: int) -> np.ndarray:
    out = np.ones_like(w, dtype=np.float64)
    for r in range(d):
        out *= w - r
    return out


def factorial_moment(sys: EnumerableEventSystem, d: int) -> float:
    """``E[W (W-1) ... (W-d+1)]`` with ``W`` the number of events that occur."""
    if d < 1:
        raise CovmaxError("d must be >= 1")
    w = sys.bits.sum(axis=1).astype(np.float64)
    return math.fsum(sys.probs * _falling(w, d))


def subset_probability_sum(sys: EnumerableEventSystem, d: int, cap: int = 1_000_000) -> float:
    """Sum over all d-subsets of events of the probability that all of them occur."""
    if d < 1:
        raise CovmaxError("d must be >= 1")
    s = sys.event_count
    if s > 20 or comb(s, d, exact=True) > cap:
        raise CapExceeded(f"enumerating C({s}, {d}) subsets exceeds the cap")
    terms = []
    for subset in combinations(range(s), d):
        terms.extend(sys.probs[sys.bits[:, list(subset)].all(axis=1)])
    return math.fsum(terms)


def normal_upper_tail(x):
    """Standard normal upper tail probability."""
    return ndtr(-np.asarray(x, dtype=np.float64))


def threshold_from_z(s: int, z: float) -> float:
    """Level ``z_n`` with ``z_n**2 = 2 log s - log log s - log pi + 2 z``."""
    return math.sqrt(2 * math.log(s) - math.log(math.log(s)) - math.log(math.pi) + 2 * z)


@dataclass
class ExceedanceEstimate:
    value: float
    std_error: float


def gaussian_exceedance_sum(
    sigma,
    z_n: float,
    d: int,
    method: str = "exact_independent",
    reps: int = 100_000,
    seed=None,
) -> ExceedanceEstimate:
    """Sum over d-subsets of ``P(|Z_i| > z_n for all i in the subset)``, ``Z ~ N(0, sigma)``.

    ``sigma`` may be an integer ``s`` as shorthand for the ``s x s`` identity
    when ``method="exact_independent"``.
    """
    if method == "exact_independent":
        if np.isscalar(sigma):
            s = int(sigma)
        else:
            S = np.asarray(sigma, dtype=np.float64)
            if not np.array_equal(S, np.eye(S.shape[0])):
                raise CovmaxError("exact_independent requires the identity correlation matrix")
            s = S.shape[0]
        p = 2 * float(normal_upper_tail(z_n))
        return ExceedanceEstimate(float(comb(s, d, exact=True)) * p**d, 0.0)
    if method != "monte_carlo":
        raise CovmaxError(f"unknown method {method!r}")
    if seed is None:
        raise CovmaxError("monte_carlo needs an explicit seed")
    S = np.asarray(sigma, dtype=np.float64)
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(S)
    total = np.empty(reps)
    block = 10_000
    for start in range(0, reps, block):
        k = min(block, reps - start)
        Z = rng.standard_normal((k, S.shape[0])) @ L.T
        w = (np.abs(Z) > z_n).sum(axis=1)
        # number of d-subsets entirely exceeded on this draw
        total[start : start + k] = comb(w, d)
    return ExceedanceEstimate(float(total.mean()), float(total.std(ddof=1) / math.sqrt(reps)))


def ks_distance(sample, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=np.float64))
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise CovmaxError("sample must be nonempty and finite")
    F = np.asarray(cdf(x), dtype=np.float64)
    N = x.size
    upper = np.arange(1, N + 1) / N - F
    lower = F - np.arange(N) / N
    return float(max(upper.max(), lower.max()))


def poisson_pmf(lam: float, k: int) -> float:
    return math.exp(-lam) * lam**k / math.factorial(k)


def exceedance_count_pmf(sys: EnumerableEventSystem, k: int) -> float:
    return float(sys.probs[sys.bits.sum(axis=1) == k].sum())


def empirical_cdf_points(sample) -> tuple[np.ndarray, np.ndarray]:
    x = np.sort(np.asarray(sample, dtype=np.float64))
    return x, np.arange(1, x.size + 1) / x.size


def subset_sum_limit(z: float, d: int) -> float:
    """``exp(-d z) / d!``, the limit of the d-th exceedance sum."""
    return math.exp(-d * z) / math.factorial(d)
