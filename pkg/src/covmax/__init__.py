"""Maximum-deviation tests for high-dimensional covariance structure."""

from .core import (
    CARDINALITY,
    THEOREM,
    CapExceeded,
    CardinalityTooSmall,
    CovmaxError,
    DegenerateVariance,
    EmptyIndexSet,
    NullCovariance,
    PairIndexSet,
    TestResult,
    gumbel_cdf,
    gumbel_normalize,
    gumbel_quantile,
    max_deviation,
    run_test,
    sample_cov_pair,
    tau_hat_pair,
)
from .processes import (
    GaussianSpec,
    IIDSpec,
    InnovationDist,
    Kappa4Boundary,
    LinearProcess,
    NonstationaryLinearSpec,
    StationaryLinearSpec,
)
from .structure import (
    TaperSpec,
    assess_taper,
    choose_bandwidth,
    pooled_autocov,
    tapered_estimate,
    taper_weights,
    test_bandedness,
    test_covariance,
    test_identity,
    test_independence,
    test_stationarity,
)

__version__ = "0.1.0"
