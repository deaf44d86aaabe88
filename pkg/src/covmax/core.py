"""Sample-moment estimators, the self-normalized maximum deviation and its Gumbel law.

All indices are 0-based. A data matrix is a plain ``(n, m)`` float array whose
rows are observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

THEOREM = "theorem"
CARDINALITY = "cardinality"
NORMALIZATION_MODES = (THEOREM, CARDINALITY)

# cap on n * (pairs per chunk) in max_deviation
_CHUNK_ELEMENTS = 1 << 22


class CovmaxError(ValueError):
    """Base class for input and contract errors raised by covmax."""


class DegenerateVariance(CovmaxError):
    def __init__(self, pair: tuple[int, int], tau: float, floor: float):
        self.pair = pair
        self.tau = tau
        self.floor = floor
        super().__init__(
            f"tau_hat for pair {pair} is {tau:.3g}, below the floor {floor:.3g}; "
            "the cross-product sequence is (nearly) constant"
        )


class CardinalityTooSmall(CovmaxError):
    pass


class EmptyIndexSet(CovmaxError):
    pass


class CapExceeded(CovmaxError):
    pass


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a float64 ``(n, m)`` array with n, m >= 2."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise CovmaxError(f"data matrix must be 2-dimensional, got shape {X.shape}")
    n, m = X.shape
    if n < 2 or m < 2:
        raise CovmaxError(f"data matrix needs n >= 2 and m >= 2, got {n}x{m}")
    if not np.all(np.isfinite(X)):
        k, i = np.argwhere(~np.isfinite(X))[0]
        raise CovmaxError(f"non-finite entry at row {k}, column {i}")
    return X


@dataclass(frozen=True)
class PairIndexSet:
    """Set of column pairs ``(i, j)``, ``i <= j``, over which a maximum is taken.

    ``kind`` is one of ``"strict"`` (i < j), ``"diagonal"`` (i <= j),
    ``"band"`` (j - i > band) or ``"custom"``.
    """

    kind: str
    m: int
    band: int = 0
    custom: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self):
        if self.kind not in ("strict", "diagonal", "band", "custom"):
            raise CovmaxError(f"unknown index set kind {self.kind!r}")
        if self.m < 2:
            raise CovmaxError("index set needs m >= 2")
        if self.kind == "band":
            if self.band < 0:
                raise CovmaxError("band must be nonnegative")
            if self.band >= self.m - 1:
                raise EmptyIndexSet(
                    f"band {self.band} leaves no pairs outside the band for m={self.m}"
                )
        if self.kind == "custom":
            if not self.custom:
                raise EmptyIndexSet("custom index set is empty")
            pairs = [(int(i), int(j)) for i, j in self.custom]
            for i, j in pairs:
                if not (0 <= i <= j < self.m):
                    raise CovmaxError(f"pair ({i}, {j}) outside 0 <= i <= j < {self.m}")
            if len(set(pairs)) != len(pairs):
                raise CovmaxError("custom index set contains duplicate pairs")
            object.__setattr__(self, "custom", tuple(sorted(pairs)))

    @classmethod
    def strict(cls, m: int) -> "PairIndexSet":
        return cls("strict", m)

    @classmethod
    def with_diagonal(cls, m: int) -> "PairIndexSet":
        return cls("diagonal", m)

    @classmethod
    def band_exterior(cls, m: int, band: int) -> "PairIndexSet":
        return cls("band", m, band=band)

    @classmethod
    def from_pairs(cls, m: int, pairs) -> "PairIndexSet":
        return cls("custom", m, custom=tuple((int(i), int(j)) for i, j in pairs))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column index arrays in row-major order."""
        if self.kind == "custom":
            a = np.array(self.custom, dtype=np.intp)
            return a[:, 0], a[:, 1]
        offset = {"strict": 1, "diagonal": 0, "band": self.band + 1}[self.kind]
        return np.triu_indices(self.m, k=offset)

    @property
    def cardinality(self) -> int:
        if self.kind == "custom":
            return len(self.custom)
        if self.kind == "diagonal":
            return self.m * (self.m + 1) // 2
        k = self.m - 1 if self.kind == "strict" else self.m - self.band - 1
        return k * (k + 1) // 2

    def default_mode(self) -> str:
        return THEOREM if self.kind in ("strict", "diagonal") else CARDINALITY

    def __contains__(self, pair) -> bool:
        i, j = pair
        if not (0 <= i <= j < self.m):
            return False
        if self.kind == "strict":
            return i < j
        if self.kind == "diagonal":
            return True
        if self.kind == "band":
            return j - i > self.band
        return (i, j) in self.custom


@dataclass(frozen=True)
class NullCovariance:
    """Hypothesized covariance entries: zero, identity, explicit matrix or Toeplitz."""

    kind: str
    matrix: Optional[np.ndarray] = field(default=None, compare=False)
    autocov: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind == "explicit":
            S = np.asarray(self.matrix, dtype=np.float64)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise CovmaxError("explicit null covariance must be a square matrix")
            if not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
                raise CovmaxError("explicit null covariance must be symmetric")
            object.__setattr__(self, "matrix", S)
        elif self.kind == "toeplitz":
            g = np.asarray(self.autocov, dtype=np.float64).ravel()
            if g.size == 0 or not g[0] > 0:
                raise CovmaxError("Toeplitz null needs gamma_0 > 0")
            object.__setattr__(self, "autocov", g)
        elif self.kind not in ("zero", "identity"):
            raise CovmaxError(f"unknown null covariance kind {self.kind!r}")

    @classmethod
    def zero(cls) -> "NullCovariance":
        return cls("zero")

    @classmethod
    def identity(cls) -> "NullCovariance":
        return cls("identity")

    @classmethod
    def explicit(cls, matrix) -> "NullCovariance":
        return cls("explicit", matrix=matrix)

    @classmethod
    def toeplitz(cls, autocov) -> "NullCovariance":
        return cls("toeplitz", autocov=autocov)

    def values(self, rows: np.ndarray, cols: np.ndarray, m: int) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(len(rows))
        if self.kind == "identity":
            return (rows == cols).astype(np.float64)
        if self.kind == "explicit":
            if self.matrix.shape != (m, m):
                raise CovmaxError(
                    f"null covariance is {self.matrix.shape}, data has m={m}"
                )
            return self.matrix[rows, cols]
        if self.autocov.size < m:
            raise CovmaxError(f"Toeplitz null has {self.autocov.size} lags, need {m}")
        return self.autocov[np.abs(cols - rows)]


@dataclass
class TestResult:
    __test__ = False  # not a pytest class

    statistic: float
    cardinality: int
    normalized: float
    p_value: float
    argmax_pair: tuple[int, int]
    normalization_mode: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha

    def to_dict(self) -> dict[str, Any]:
        return {
            "statistic": self.statistic,
            "cardinality": self.cardinality,
            "normalized": self.normalized,
            "p_value": self.p_value,
            "argmax_pair": list(self.argmax_pair),
            "normalization_mode": self.normalization_mode,
            "metadata": self.metadata,
        }


def _check_index(X: np.ndarray, *idx: int) -> None:
    m = X.shape[1]
    for i in idx:
        if not 0 <= i < m:
            raise IndexError(f"column index {i} out of range for m={m}")


def sample_cov_pair(X, i: int, j: int) -> float:
    """Sample covariance (divisor n) of columns ``i`` and ``j``."""
    X = np.asarray(X, dtype=np.float64)
    _check_index(X, i, j)
    xi = X[:, i] - X[:, i].mean()
    xj = X[:, j] - X[:, j].mean()
    return float(np.dot(xi, xj) / X.shape[0])


def tau_hat_pair(X, i: int, j: int) -> float:
    """Empirical variance of the centered cross-products of columns ``i`` and ``j``."""
    X = np.asarray(X, dtype=np.float64)
    _check_index(X, i, j)
    prod = (X[:, i] - X[:, i].mean()) * (X[:, j] - X[:, j].mean())
    dev = prod - prod.mean()
    return float(np.dot(dev, dev) / X.shape[0])


def default_tau_floor(X: np.ndarray) -> float:
    Xc = X - X.mean(axis=0)
    second = (Xc * Xc).mean(axis=0).max()
    return 1e-12 * second**2


def pair_moments(X, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectors of sigma_hat and tau_hat for the given pairs, computed in chunks."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    sigma = np.empty(len(rows))
    tau = np.empty(len(rows))
    step = max(1, _CHUNK_ELEMENTS // n)
    for start in range(0, len(rows), step):
        sl = slice(start, start + step)
        prod = Xc[:, rows[sl]] * Xc[:, cols[sl]]
        s = prod.mean(axis=0)
        prod -= s
        sigma[sl] = s
        tau[sl] = np.einsum("ij,ij->j", prod, prod) / n
    return sigma, tau


def max_deviation(
    X,
    null: NullCovariance,
    idx: PairIndexSet,
    tau_floor: Optional[float] = None,
) -> tuple[float, tuple[int, int]]:
    """Maximum over ``idx`` of ``|sigma_hat - sigma| / sqrt(tau_hat)``.

    Returns the statistic and the first maximizing pair in row-major order.
    Raises :class:`DegenerateVariance` if any ``tau_hat`` falls below ``tau_floor``.
    """
    X = as_data_matrix(X)
    m = X.shape[1]
    if idx.m != m:
        raise CovmaxError(f"index set is for m={idx.m}, data has m={m}")
    if tau_floor is None:
        tau_floor = default_tau_floor(X)
    rows, cols = idx.arrays()
    sigma, tau = pair_moments(X, rows, cols)
    bad = np.flatnonzero(tau < tau_floor)
    if bad.size:
        k = bad[0]
        raise DegenerateVariance((int(rows[k]), int(cols[k])), float(tau[k]), tau_floor)
    # zero floor with zero tau: 0/0 only if the deviation is also zero
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.abs(sigma - null.values(rows, cols, m)) / np.sqrt(tau)
    ratio = np.where(np.isnan(ratio), 0.0, ratio)
    k = int(np.argmax(ratio))
    return float(ratio[k]), (int(rows[k]), int(cols[k]))


def normalization_offset(mode: str, s: int, m: Optional[int] = None) -> float:
    """The constant subtracted from ``n * stat**2`` for the given mode."""
    if mode == THEOREM:
        if m is None or m < 3:
            raise CardinalityTooSmall("theorem constants need m >= 3")
        return 4 * math.log(m) - math.log(math.log(m)) - math.log(8 * math.pi)
    if mode == CARDINALITY:
        if s < 3:
            raise CardinalityTooSmall(f"cardinality {s} < 3; log log s is not positive")
        return 2 * math.log(s) - math.log(math.log(s)) - math.log(math.pi)
    raise CovmaxError(f"unknown normalization mode {mode!r}")


def gumbel_normalize(
    statistic: float, n: int, s: int, mode: str = THEOREM, m: Optional[int] = None
) -> float:
    if s < 3:
        raise CardinalityTooSmall(f"cardinality {s} < 3; log log s is not positive")
    if n < 2:
        raise CovmaxError("need n >= 2")
    return n * statistic**2 - normalization_offset(mode, s, m)


def gumbel_cdf(y):
    """Limit law ``exp(-exp(-y/2))``."""
    return np.exp(-np.exp(-np.asarray(y, dtype=np.float64) / 2))


def gumbel_sf(y):
    """``1 - gumbel_cdf(y)`` without cancellation for large y."""
    return -np.expm1(-np.exp(-np.asarray(y, dtype=np.float64) / 2))


def gumbel_quantile(alpha):
    """Critical value ``y`` with ``gumbel_cdf(y) = 1 - alpha``."""
    a = np.asarray(alpha, dtype=np.float64)
    if np.any((a <= 0) | (a >= 1)):
        raise CovmaxError("alpha must lie strictly between 0 and 1")
    return -2 * np.log(-np.log1p(-a))


def run_test(
    X,
    null: NullCovariance,
    idx: PairIndexSet,
    mode: Optional[str] = None,
    tau_floor: Optional[float] = None,
) -> TestResult:
    X = as_data_matrix(X)
    n, m = X.shape
    mode = mode or idx.default_mode()
    s = idx.cardinality
    stat, pair = max_deviation(X, null, idx, tau_floor)
    y = gumbel_normalize(stat, n, s, mode, m)
    return TestResult(
        statistic=stat,
        cardinality=s,
        normalized=y,
        p_value=float(gumbel_sf(y)),
        argmax_pair=pair,
        normalization_mode=mode,
    )
