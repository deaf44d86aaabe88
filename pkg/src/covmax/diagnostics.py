"""Finite-model tabulations of the dependence and moment conditions.

Nothing here claims to verify an asymptotic statement. Each function
evaluates the left-hand side of a condition for one concrete model so that
trends over growing ``m`` can be inspected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .core import CapExceeded, CovmaxError, PairIndexSet
from .processes import InnovationDist, LinearProcess, NonstationaryLinearSpec, _as_process


@dataclass
class ProductCorrelations:
    """Covariances and correlations of the products ``X_i X_j`` over an index set."""

    rows: np.ndarray
    cols: np.ndarray
    cov: np.ndarray
    corr: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return np.diag(self.cov).copy()


@dataclass
class DependenceReport:
    tau_min: float
    gamma_max: float
    gamma_b: dict[int, float]
    g_counts: dict[float, int]
    cov_sq_sum: float
    kappa4: float
    corr_max_pairs: float
    cardinality: int
    gamma_b_log_b: dict[int, float] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tau_min": self.tau_min,
            "gamma_max": self.gamma_max,
            "gamma_b": [{"b": b, "value": v} for b, v in self.gamma_b.items()],
            "gamma_b_log_b": [{"b": b, "value": v} for b, v in self.gamma_b_log_b.items()],
            "g_counts": [{"t": t, "count": c} for t, c in self.g_counts.items()],
            "cov_sq_sum": self.cov_sq_sum,
            "kappa4": self.kappa4,
            "corr_max_pairs": self.corr_max_pairs,
            "cardinality": self.cardinality,
            "flags": self.flags,
        }


@dataclass
class DependenceProfile:
    delta: np.ndarray
    psi: np.ndarray
    p: int
    h: Optional[np.ndarray] = None


def product_correlations(spec, idx: PairIndexSet, cap: int = 2000) -> ProductCorrelations:
    """Full table of ``Cov(X_a, X_b)`` and ``Cor(X_a, X_b)`` for pairs ``a, b`` in ``idx``."""
    proc: LinearProcess = _as_process(spec, idx.m)
    s = idx.cardinality
    if s > cap:
        raise CapExceeded(f"index set has {s} pairs, table cap is {cap}")
    I, J = idx.arrays()
    S = proc.covariance()
    C = proc.coef
    P = C[I] * C[J]
    cov = proc.innovations.kappa4 * (P @ P.T)
    cov += S[np.ix_(I, I)] * S[np.ix_(J, J)] + S[np.ix_(I, J)] * S[np.ix_(J, I)]
    cov = (cov + cov.T) / 2
    tau = np.diag(cov).copy()
    if np.any(tau <= 1e-12):
        k = int(np.argmin(tau))
        raise CovmaxError(f"product variance vanishes for pair ({I[k]}, {J[k]})")
    corr = cov / np.sqrt(np.outer(tau, tau))
    np.fill_diagonal(corr, 1.0)
    return ProductCorrelations(I, J, cov, np.clip(corr, -1.0, 1.0))


def gamma_b_values(abs_corr: np.ndarray, b_grid: Sequence[int]) -> dict[int, float]:
    """Largest, over rows, b-th largest off-diagonal absolute correlation.

    Returns 0 for ``b`` beyond the number of off-diagonal entries.
    """
    s = abs_corr.shape[0]
    off = abs_corr.copy()
    np.fill_diagonal(off, -np.inf)
    desc = -np.sort(-off, axis=1)[:, : s - 1]
    out = {}
    for b in b_grid:
        if b < 1:
            raise CovmaxError("b must be >= 1")
        out[int(b)] = float(desc[:, b - 1].max()) if b <= s - 1 else 0.0
    return out


def g_count_values(abs_corr: np.ndarray, t_grid: Sequence[float]) -> dict[float, int]:
    """``max_a #{b : |Cor(X_a, X_b)| > t}``, the pair itself included."""
    return {float(t): int((abs_corr > t).sum(axis=1).max()) for t in t_grid}


def condition_report(
    spec,
    idx: PairIndexSet,
    b_grid: Sequence[int] = (1, 2, 4, 8, 16),
    t_grid: Sequence[float] = (0.05, 0.1, 0.2, 0.5),
    cap: int = 2000,
) -> DependenceReport:
    table = product_correlations(spec, idx, cap)
    proc = _as_process(spec, idx.m)
    S = proc.covariance()
    abs_corr = np.abs(table.corr)
    s = abs_corr.shape[0]
    off = abs_corr[~np.eye(s, dtype=bool)]
    gamma_b = gamma_b_values(abs_corr, b_grid)
    g_counts = g_count_values(abs_corr, t_grid)
    iu = np.triu_indices(idx.m, k=1)
    d = np.sqrt(np.diag(S))
    R = S / np.outer(d, d)
    gb = list(gamma_b.values())
    gc = list(g_counts.values())
    return DependenceReport(
        tau_min=float(table.tau.min()),
        gamma_max=float(off.max()) if off.size else 0.0,
        gamma_b=gamma_b,
        g_counts=g_counts,
        cov_sq_sum=float(np.sum(table.cov**2)),
        kappa4=proc.innovations.kappa4,
        corr_max_pairs=float(np.abs(R[iu]).max()),
        cardinality=s,
        gamma_b_log_b={b: v * math.log(b) for b, v in gamma_b.items()},
        flags={
            "gamma_b_nonincreasing": all(x >= y for x, y in zip(gb, gb[1:])),
            "g_counts_nonincreasing": all(x >= y for x, y in zip(gc, gc[1:])),
        },
    )


def difference_norm(dist: InnovationDist, p: int) -> float:
    """``||eps - eps'||_p`` for independent copies, p in {2, 4}.

    Uses ``E(eps - eps')**4 = 2 E eps**4 + 6 = 12 + 2 kappa4`` for unit variance.
    """
    if p == 2:
        return math.sqrt(2.0)
    if p == 4:
        return (12.0 + 2.0 * dist.kappa4) ** 0.25
    raise CovmaxError("only p = 2 and p = 4 are supported")


def physical_dep_linear(coeffs, p: int, dist: InnovationDist) -> DependenceProfile:
    a = np.asarray(coeffs, dtype=np.float64).ravel()
    delta = np.abs(a) * difference_norm(dist, p)
    return DependenceProfile(delta=delta, psi=_tail_root(delta), p=p)


def _tail_root(delta: np.ndarray) -> np.ndarray:
    # one trailing zero for k past the truncation
    tail = np.append(np.cumsum((delta**2)[::-1])[::-1], 0.0)
    return np.sqrt(tail)


def psi_tail(profile: DependenceProfile, k: int) -> float:
    if k < 0:
        raise CovmaxError("k must be nonnegative")
    return float(profile.psi[k]) if k < profile.psi.size else 0.0


def h_profile(spec: NonstationaryLinearSpec) -> np.ndarray:
    """``h(k) = max_i sqrt(sum_{|t| >= floor(k/2)} f[i, t]**2)`` for k = 0..2T+2."""
    f2 = spec.f**2
    T = spec.T
    t = np.abs(np.arange(-T, T + 1))
    h = np.empty(2 * T + 3)
    for k in range(h.size):
        h[k] = math.sqrt(f2[:, t >= k // 2].sum(axis=1).max()) if k // 2 <= T else 0.0
    if spec.normalize:
        h[0] = 1.0
    return h


def _abs_moment(dist: InnovationDist, p: float) -> float:
    if dist.name == "rademacher":
        return 1.0
    if dist.name == "normal":
        return 2 ** (p / 2) * special.gamma((p + 1) / 2) / math.sqrt(math.pi)
    if dist.name == "uniform":
        return math.sqrt(3.0) ** p / (p + 1)
    nu = dist.df
    if p >= nu:
        return math.inf
    scale = ((nu - 2) / nu) ** (p / 2)
    log_m = (
        (p / 2) * math.log(nu)
        + special.gammaln((p + 1) / 2)
        + special.gammaln((nu - p) / 2)
        - 0.5 * math.log(math.pi)
        - special.gammaln(nu / 2)
    )
    return scale * math.exp(log_m)


def _exp_moment(dist: InnovationDist, t: float, p: float) -> float:
    if t <= 0:
        return 1.0
    if dist.name == "rademacher":
        return math.exp(t)
    if dist.name == "student_t":
        return math.inf
    if dist.name == "uniform":
        r = math.sqrt(3.0)
        val, _ = integrate.quad(lambda x: math.exp(t * x**p) / r, 0, r, epsabs=1e-10)
        return val
    if p > 2 or (p == 2 and t >= 0.5):
        return math.inf
    dens = lambda x: 2 * math.exp(t * x**p - x * x / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    val, _ = integrate.quad(dens, 0, math.inf, epsabs=1e-10, limit=200)
    return val


def moment_summaries(
    dist: InnovationDist,
    p_grid: Sequence[float] = (2, 4, 8),
    t_grid: Sequence[float] = (0.1, 0.25),
) -> dict[str, Any]:
    """``E|eps|**p`` over ``p_grid`` and ``E exp(t |eps|**p)`` over ``t_grid x p_grid``.

    Infinite values are reported as ``math.inf``.
    """
    return {
        "distribution": dist.to_dict(),
        "kappa4": dist.kappa4,
        "abs_moments": {float(p): _abs_moment(dist, p) for p in p_grid},
        "exp_moments": {
            (float(t), float(p)): _exp_moment(dist, t, p) for t in t_grid for p in p_grid
        },
    }
