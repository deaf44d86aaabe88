"""Reproducible Monte Carlo studies of the structure tests.

Replication ``r`` draws its data from ``SeedSequence(master_seed, spawn_key=(r,))``,
so results do not depend on how replications are spread over threads.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .core import (
    CovmaxError,
    DegenerateVariance,
    NullCovariance,
    PairIndexSet,
    TestResult,
    gumbel_cdf,
    run_test,
)
from .oracles import empirical_cdf_points, ks_distance
from .specio import build_process, validate
from .structure import (
    assess_taper,
    test_bandedness,
    test_covariance,
    test_identity,
    test_independence,
    test_stationarity,
)

logger = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.01


class StudyAborted(CovmaxError):
    pass


@dataclass
class StudyConfig:
    generator: dict
    test: dict
    replications: int
    n: int
    m: int
    master_seed: int = 0
    nominal_levels: tuple[float, ...] = (0.01, 0.05, 0.10)

    def __post_init__(self):
        validate(self.to_dict(), "study_config")
        validate(self.test, "test")
        self.nominal_levels = tuple(float(a) for a in self.nominal_levels)

    @classmethod
    def from_dict(cls, doc: dict) -> "StudyConfig":
        validate(doc, "study_config")
        return cls(**doc)

    def to_dict(self) -> dict:
        return {
            "generator": self.generator,
            "test": self.test,
            "replications": self.replications,
            "n": self.n,
            "m": self.m,
            "master_seed": self.master_seed,
            "nominal_levels": list(self.nominal_levels),
        }


@dataclass(eq=False)
class StudySummary:
    config: StudyConfig
    y_values: np.ndarray
    p_values: np.ndarray
    rejection_rates: dict[float, float]
    ks_to_gumbel: float
    failures: int
    runtime: float = 0.0

    def __eq__(self, other) -> bool:
        """Bitwise equality of everything except the wall-clock runtime."""
        if not isinstance(other, StudySummary):
            return NotImplemented
        return (
            self.config == other.config
            and self.y_values.tobytes() == other.y_values.tobytes()
            and self.p_values.tobytes() == other.p_values.tobytes()
            and self.rejection_rates == other.rejection_rates
            and self.ks_to_gumbel == other.ks_to_gumbel
            and self.failures == other.failures
        )

    def to_dict(self, include_runtime: bool = False) -> dict[str, Any]:
        d = {
            "config": self.config.to_dict(),
            "replications": self.config.replications,
            "failures": self.failures,
            "y_values": self.y_values,
            "p_values": self.p_values,
            "rejection_rates": [{"alpha": a, "rate": r} for a, r in self.rejection_rates.items()],
            "ks_to_gumbel": self.ks_to_gumbel,
        }
        if include_runtime:
            d["runtime_seconds"] = self.runtime
        return d

    def replication_rows(self) -> np.ndarray:
        return np.column_stack([np.arange(self.y_values.size), self.y_values, self.p_values])

    def ecdf_rows(self) -> np.ndarray:
        y = self.y_values[np.isfinite(self.y_values)]
        x, F = empirical_cdf_points(y)
        return np.column_stack([x, F, gumbel_cdf(x)])


def make_test(spec: dict, truth: Optional[np.ndarray] = None) -> Callable[[np.ndarray], TestResult]:
    """Turn a test document into a function of the data matrix."""
    validate(spec, "test")
    name = spec["name"]
    mode = spec.get("normalization")
    if name == "independence":
        if mode:
            return lambda X: run_test(X, NullCovariance.zero(), PairIndexSet.strict(X.shape[1]), mode)
        return test_independence
    if name == "identity":
        return lambda X: test_identity(X, mode)
    if name == "stationarity":
        return lambda X: test_stationarity(X, mode)
    if name == "bandedness":
        return lambda X: test_bandedness(X, spec["band"], mode)
    if name == "taper":
        return lambda X: assess_taper(X, spec.get("band"), spec.get("eta"), mode)
    sigma0 = spec["sigma0"]
    if isinstance(sigma0, str):
        if truth is None:
            raise CovmaxError("sigma0 = 'truth' needs a generator with a known covariance")
        sigma0 = truth
    sigma0 = np.asarray(sigma0, dtype=np.float64)
    return lambda X: test_covariance(X, sigma0, mode)


def replication_seed(master_seed: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(r,))


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("COVMAX_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise CovmaxError("thread count must be >= 1")
    return threads


def run_study(cfg: StudyConfig, threads: Optional[int] = None) -> StudySummary:
    start = time.perf_counter()
    proc = build_process(cfg.generator, cfg.m)
    if proc.m != cfg.m:
        raise CovmaxError(f"generator has dimension {proc.m}, config says m={cfg.m}")
    test = make_test(cfg.test, proc.covariance())

    def one(r: int) -> tuple[float, float]:
        X = proc.generate(cfg.n, np.random.default_rng(replication_seed(cfg.master_seed, r)))
        try:
            res = test(X)
        except DegenerateVariance as e:
            logger.warning("replication %d: %s", r, e)
            return np.nan, np.nan
        return res.normalized, res.p_value

    R = cfg.replications
    workers = min(resolve_threads(threads), R)
    if workers == 1:
        out = [one(r) for r in range(R)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, range(R), chunksize=max(1, R // (8 * workers))))
    y = np.array([o[0] for o in out])
    p = np.array([o[1] for o in out])
    ok = np.isfinite(y)
    failures = int(R - ok.sum())
    if failures > MAX_FAILURE_RATE * R:
        raise StudyAborted(f"{failures} of {R} replications hit a degenerate variance")
    rates = {a: float(np.mean(p[ok] <= a)) for a in cfg.nominal_levels}
    return StudySummary(
        config=cfg,
        y_values=y,
        p_values=p,
        rejection_rates=rates,
        ks_to_gumbel=ks_distance(y[ok], gumbel_cdf),
        failures=failures,
        runtime=time.perf_counter() - start,
    )


@dataclass
class SweepRow:
    n: int
    m: int
    replications: int
    ks_to_gumbel: float
    rejection_rates: dict[float, float]
    non_improvement: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "replications": self.replications,
            "ks_to_gumbel": self.ks_to_gumbel,
            "rejection_rates": [{"alpha": a, "rate": r} for a, r in self.rejection_rates.items()],
            "non_improvement": self.non_improvement,
        }


def convergence_sweep(
    cfgs: Sequence[StudyConfig], threads: Optional[int] = None, slack: float = 0.05
) -> list[SweepRow]:
    """Run studies ordered by scale; flag a row whose KS distance exceeds the previous one by > ``slack``."""
    if len(cfgs) < 2:
        raise CovmaxError("a sweep needs at least two configs")
    rows: list[SweepRow] = []
    for cfg in cfgs:
        s = run_study(cfg, threads)
        worse = bool(rows) and s.ks_to_gumbel > rows[-1].ks_to_gumbel + slack
        rows.append(SweepRow(cfg.n, cfg.m, cfg.replications, s.ks_to_gumbel, s.rejection_rates, worse))
    return rows
