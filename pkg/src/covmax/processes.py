"""Synthetic data with known second- and fourth-order structure.

Every generator is a linear map of i.i.d. standardized innovations,
``X = eps @ C.T`` row by row, where ``C`` is an ``(m, U)`` coefficient matrix.
Population covariances, fourth cumulants and cross-product variances follow
exactly from ``C`` and the innovation fourth cumulant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import toeplitz

from .core import CovmaxError

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]

DISTRIBUTIONS = ("normal", "uniform", "student_t", "rademacher")


class Kappa4Boundary(CovmaxError):
    """Cross-product variance is zero because the innovation kurtosis is at its floor."""


def make_rng(seed: SeedLike) -> np.random.Generator:
    if seed is None:
        raise CovmaxError("an explicit seed is required")
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class InnovationDist:
    """Mean-zero, unit-variance innovation law.

    ``student_t`` is rescaled by ``sqrt((df - 2) / df)`` and needs ``df > 8``;
    ``uniform`` is uniform on ``[-sqrt(3), sqrt(3)]``.
    """

    name: str = "normal"
    df: Optional[float] = None

    def __post_init__(self):
        if self.name not in DISTRIBUTIONS:
            raise CovmaxError(f"unknown innovation distribution {self.name!r}")
        if self.name == "student_t":
            if self.df is None or not self.df > 8:
                raise CovmaxError("standardized Student-t innovations need df > 8")

    @property
    def kappa4(self) -> float:
        return {
            "normal": 0.0,
            "uniform": -1.2,
            "rademacher": -2.0,
            "student_t": 6.0 / (self.df - 4) if self.df else math.nan,
        }[self.name]

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.name == "normal":
            return rng.standard_normal(size)
        if self.name == "uniform":
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        if self.name == "rademacher":
            return rng.integers(0, 2, size).astype(np.float64) * 2 - 1
        return rng.standard_t(self.df, size) * math.sqrt((self.df - 2) / self.df)

    def to_dict(self) -> dict:
        d = {"dist": self.name}
        if self.df is not None:
            d["df"] = self.df
        return d


@dataclass
class LinearProcess:
    """``X_i = sum_u coef[i, u] * eps_u`` with i.i.d. innovations ``eps``."""

    coef: np.ndarray
    innovations: InnovationDist = field(default_factory=InnovationDist)
    unit_variance: bool = False

    def __post_init__(self):
        self.coef = np.atleast_2d(np.asarray(self.coef, dtype=np.float64))

    @property
    def m(self) -> int:
        return self.coef.shape[0]

    def generate(self, n: int, seed: SeedLike) -> np.ndarray:
        rng = make_rng(seed)
        eps = self.innovations.sample(rng, (n, self.coef.shape[1]))
        return eps @ self.coef.T

    def covariance(self) -> np.ndarray:
        S = self.coef @ self.coef.T
        S = (S + S.T) / 2
        if self.unit_variance:
            np.fill_diagonal(S, 1.0)
        return S

    def cum4(self, i: int, j: int, k: int, l: int) -> float:
        i, j, k, l = sorted((i, j, k, l))
        C = self.coef
        return float(self.innovations.kappa4 * np.sum(C[i] * C[j] * C[k] * C[l]))

    def cov_products(self, i: int, j: int, k: int, l: int, sigma: Optional[np.ndarray] = None) -> float:
        S = self.covariance() if sigma is None else sigma
        return self.cum4(i, j, k, l) + S[i, k] * S[j, l] + S[i, l] * S[j, k]

    def tau(self, i: int, j: int, sigma: Optional[np.ndarray] = None) -> float:
        t = self.cov_products(i, j, i, j, sigma)
        if t <= 1e-12:
            raise Kappa4Boundary(
                f"Var(X_{i} X_{j}) = {t:.3g}; innovation kappa4 = {self.innovations.kappa4} "
                "makes this cross-product (nearly) constant"
            )
        return t


@dataclass(frozen=True)
class IIDSpec:
    innovations: InnovationDist = InnovationDist()

    def process(self, m: int) -> LinearProcess:
        return LinearProcess(np.eye(m), self.innovations, unit_variance=True)


@dataclass
class StationaryLinearSpec:
    """Causal moving average ``X_i = sum_{j=0}^J a_j eps_{i-j}``, rescaled so ``sum a_j^2 = 1``."""

    coeffs: np.ndarray
    innovations: InnovationDist = field(default_factory=InnovationDist)
    normalize: bool = True

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=np.float64).ravel()
        if a.size == 0 or not np.any(a):
            raise CovmaxError("coefficient vector must have a nonzero entry")
        if self.normalize:
            a = a / np.sqrt(np.sum(a * a))
        self.coeffs = a

    @property
    def lag(self) -> int:
        return self.coeffs.size - 1

    def process(self, m: int) -> LinearProcess:
        J = self.lag
        C = np.zeros((m, m + J))
        rows = np.arange(m)
        for j, a in enumerate(self.coeffs):
            C[rows, rows - j + J] = a
        return LinearProcess(C, self.innovations, unit_variance=self.normalize)

    def autocovariance(self, m: int) -> np.ndarray:
        a = self.coeffs
        g = np.zeros(m)
        for h in range(min(m, a.size)):
            g[h] = np.dot(a[: a.size - h], a[h:])
        if self.normalize:
            g[0] = 1.0
        return g


@dataclass
class NonstationaryLinearSpec:
    """``X_i = sum_{t=-T}^{T} f[i, t + T] eps_{i-t}`` with each row of ``f`` of unit norm."""

    f: np.ndarray
    innovations: InnovationDist = field(default_factory=InnovationDist)
    normalize: bool = True

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.f, dtype=np.float64))
        if f.shape[1] % 2 == 0:
            raise CovmaxError("f table needs an odd number of columns (t = -T..T)")
        norms = np.sqrt(np.sum(f * f, axis=1))
        if np.any(norms == 0):
            raise CovmaxError("every row of the f table needs a nonzero entry")
        if self.normalize:
            f = f / norms[:, None]
        self.f = f

    @property
    def m(self) -> int:
        return self.f.shape[0]

    @property
    def T(self) -> int:
        return (self.f.shape[1] - 1) // 2

    def process(self, m: Optional[int] = None) -> LinearProcess:
        if m is not None and m != self.m:
            raise CovmaxError(f"f table has m={self.m} rows, asked for m={m}")
        T = self.T
        C = np.zeros((self.m, self.m + 2 * T))
        rows = np.arange(self.m)
        for c in range(2 * T + 1):
            # coefficient f_{i,t} multiplies eps_{i-t}; column of eps_e is e + T
            C[rows, rows - c + 2 * T] = self.f[:, c]
        return LinearProcess(C, self.innovations, unit_variance=self.normalize)


@dataclass
class GaussianSpec:
    """Gaussian rows with a given covariance matrix (factored by Cholesky)."""

    cov: np.ndarray

    def __post_init__(self):
        self.cov = np.asarray(self.cov, dtype=np.float64)

    @classmethod
    def from_autocov(cls, gamma) -> "GaussianSpec":
        return cls(toeplitz(np.asarray(gamma, dtype=np.float64)))

    def process(self, m: Optional[int] = None) -> LinearProcess:
        if m is not None and m != self.cov.shape[0]:
            raise CovmaxError(f"covariance is {self.cov.shape[0]}-dimensional, asked for m={m}")
        L = np.linalg.cholesky(self.cov)
        return LinearProcess(L, InnovationDist("normal"))


def column_scaled(proc: LinearProcess, scales) -> LinearProcess:
    """Multiply column ``i`` of the generated data by ``scales[i]``."""
    scales = np.asarray(scales, dtype=np.float64)
    return LinearProcess(proc.coef * scales[:, None], proc.innovations, unit_variance=False)


def _as_process(spec, m: Optional[int] = None) -> LinearProcess:
    if isinstance(spec, LinearProcess):
        return spec
    return spec.process(m) if m is not None else spec.process()


def gen_iid(n: int, m: int, dist: InnovationDist, seed: SeedLike) -> np.ndarray:
    if n < 2 or m < 1:
        raise CovmaxError("gen_iid needs n >= 2 and m >= 1")
    return dist.sample(make_rng(seed), (n, m))


def gen_stationary_linear(n: int, m: int, spec: StationaryLinearSpec, seed: SeedLike) -> np.ndarray:
    return spec.process(m).generate(n, seed)


def gen_nonstationary_linear(n: int, m: int, spec: NonstationaryLinearSpec, seed: SeedLike) -> np.ndarray:
    return spec.process(m).generate(n, seed)


def long_memory_coeffs(beta: float, J: int, variant: str = "power_law", normalize: bool = True) -> np.ndarray:
    """Hyperbolically decaying moving-average coefficients ``a_0..a_J``.

    ``power_law``: ``a_0 = 1``, ``a_i = i**-beta``. ``boundary_log``:
    ``a_i = i**-0.5 / log(i)**2`` for ``i >= 2`` with ``a_0 = a_1 = 1``.
    """
    if J < 2:
        raise CovmaxError("long-memory coefficients need J >= 2")
    i = np.arange(J + 1, dtype=np.float64)
    a = np.ones(J + 1)
    if variant == "power_law":
        if not 0.5 < beta <= 1:
            raise CovmaxError(f"beta must lie in (1/2, 1], got {beta}")
        a[1:] = i[1:] ** -beta
    elif variant == "boundary_log":
        a[2:] = i[2:] ** -0.5 / np.log(i[2:]) ** 2
    else:
        raise CovmaxError(f"unknown long-memory variant {variant!r}")
    if normalize:
        a /= np.sqrt(np.sum(a * a))
    return a


def ar1_coeffs(phi: float, J: int) -> np.ndarray:
    """Truncated MA representation of an AR(1): ``a_j = phi**j``, j = 0..J."""
    if not -1 < phi < 1:
        raise CovmaxError("AR(1) coefficient must lie in (-1, 1)")
    return phi ** np.arange(J + 1, dtype=np.float64)


def true_cov_linear(spec, m: Optional[int] = None) -> np.ndarray:
    return _as_process(spec, m).covariance()


def true_cov_stationary(spec: StationaryLinearSpec, m: int) -> np.ndarray:
    return toeplitz(spec.autocovariance(m))


def cum4_linear(spec, i: int, j: int, k: int, l: int, m: Optional[int] = None) -> float:
    return _as_process(spec, m).cum4(i, j, k, l)


def cov_products(spec, i: int, j: int, k: int, l: int, m: Optional[int] = None) -> float:
    """``Cov(X_i X_j, X_k X_l)`` for the linear model."""
    return _as_process(spec, m).cov_products(i, j, k, l)


def true_tau_linear(spec, i: int, j: int, m: Optional[int] = None) -> float:
    return _as_process(spec, m).tau(i, j)
