import itertools
import math

import numpy as np
import pytest

from covmax.core import CovmaxError
from covmax.processes import (
    GaussianSpec,
    IIDSpec,
    InnovationDist,
    Kappa4Boundary,
    NonstationaryLinearSpec,
    StationaryLinearSpec,
    cov_products,
    cum4_linear,
    gen_iid,
    gen_nonstationary_linear,
    gen_stationary_linear,
    long_memory_coeffs,
    true_cov_linear,
    true_cov_stationary,
    true_tau_linear,
)
from covmax.structure import sample_covariance

FOURTH_MOMENT = {"normal": 3.0, "uniform": 1.8, "rademacher": 1.0}


def random_spec(m, T, seed, dist="normal"):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(m, 2 * T + 1))
    return NonstationaryLinearSpec(f, InnovationDist(dist))


def coefficient_map(spec, i):
    """innovation index -> coefficient, straight from X_i = sum_t f[i,t] eps_{i-t}."""
    T = spec.T
    return {i - t: spec.f[i, t + T] for t in range(-T, T + 1)}


def brute_cov(spec, i, j):
    ci, cj = coefficient_map(spec, i), coefficient_map(spec, j)
    return sum(a * cj[u] for u, a in ci.items() if u in cj)


def brute_fourth_moment(spec, idx, mu4):
    maps = [coefficient_map(spec, i) for i in idx]
    total = 0.0
    for us in itertools.product(*[list(mp) for mp in maps]):
        counts = {}
        for u in us:
            counts[u] = counts.get(u, 0) + 1
        if sorted(counts.values()) == [4]:
            e = mu4
        elif sorted(counts.values()) == [2, 2]:
            e = 1.0
        else:
            continue
        total += e * maps[0][us[0]] * maps[1][us[1]] * maps[2][us[2]] * maps[3][us[3]]
    return total


def test_innovation_kappa4_values():
    assert InnovationDist("normal").kappa4 == 0
    assert InnovationDist("rademacher").kappa4 == -2
    assert InnovationDist("uniform").kappa4 == pytest.approx(-1.2)
    assert InnovationDist("student_t", 10).kappa4 == pytest.approx(1.0)
    with pytest.raises(CovmaxError):
        InnovationDist("student_t", 6)
    with pytest.raises(CovmaxError):
        InnovationDist("cauchy")


@pytest.mark.parametrize("name,df", [("normal", None), ("uniform", None), ("rademacher", None), ("student_t", 12)])
def test_innovations_are_standardized(name, df):
    x = gen_iid(200_000, 1, InnovationDist(name, df), seed=1).ravel()
    assert abs(x.mean()) < 4 / math.sqrt(x.size)
    assert x.var() == pytest.approx(1.0, rel=0.05)


def test_gen_iid_determinism_and_support():
    d = InnovationDist("rademacher")
    a = gen_iid(50, 4, d, seed=7)
    b = gen_iid(50, 4, d, seed=7)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {-1.0, 1.0}
    assert not np.array_equal(a, gen_iid(50, 4, d, seed=8))


def test_gen_iid_requires_seed():
    with pytest.raises(CovmaxError):
        gen_iid(5, 2, InnovationDist(), seed=None)


def test_unit_coefficient_reduces_to_iid():
    spec = StationaryLinearSpec([1.0])
    assert np.array_equal(gen_stationary_linear(30, 6, spec, seed=3), gen_iid(30, 6, InnovationDist(), seed=3))


def test_ma1_lag_one_correlation():
    spec = StationaryLinearSpec([1.0, 1.0])
    S = true_cov_stationary(spec, 4)
    assert S[0, 1] == pytest.approx(0.5, abs=1e-15)
    assert S[0, 2] == 0.0
    X = gen_stationary_linear(100_000, 4, spec, seed=11)
    assert abs(sample_covariance(X)[1, 2] - 0.5) < 0.01


def test_stationary_covariance_is_toeplitz_and_matches_process():
    spec = StationaryLinearSpec(long_memory_coeffs(0.8, 40))
    S = true_cov_stationary(spec, 12)
    for i in range(11):
        assert np.allclose(np.diag(S, i), S[0, i])
    np.testing.assert_allclose(true_cov_linear(spec, 12), S, atol=1e-14)


def test_long_memory_coefficient_values():
    raw = long_memory_coeffs(0.75, 10, normalize=False)
    assert raw[0] == 1.0
    assert raw[4] == pytest.approx(2**-1.5, rel=1e-15)
    assert np.all(np.diff(raw[1:]) < 0)
    bl = long_memory_coeffs(0.5, 10, "boundary_log", normalize=False)
    assert bl[4] == pytest.approx(0.5 / math.log(4) ** 2, rel=1e-15)
    assert bl[4] == pytest.approx(0.260171, abs=1e-6)
    a = long_memory_coeffs(0.75, 200)
    assert np.sum(a * a) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(CovmaxError):
        long_memory_coeffs(0.4, 10)
    with pytest.raises(CovmaxError):
        long_memory_coeffs(0.75, 1)


def test_nonstationary_identity_table_is_iid():
    f = np.zeros((5, 3))
    f[:, 1] = 1.0
    spec = NonstationaryLinearSpec(f)
    assert np.array_equal(gen_nonstationary_linear(20, 5, spec, seed=2), gen_iid(20, 7, InnovationDist(), seed=2)[:, 1:6])
    np.testing.assert_array_equal(true_cov_linear(spec), np.eye(5))


def test_true_cov_matches_brute_force_expansion():
    for seed in range(5):
        spec = random_spec(4, 2, seed)
        S = true_cov_linear(spec)
        for i in range(4):
            for j in range(4):
                assert S[i, j] == pytest.approx(brute_cov(spec, i, j), abs=1e-14)
        assert np.all(np.diag(S) == 1.0)


def test_aligned_columns_have_unit_correlation():
    f = np.zeros((3, 5))
    f[0, 2:] = [0.6, 0.8, 0.0]  # eps_0, eps_{-1}
    f[1, 3:] = [0.6, 0.8]  # X_1 uses t=1,2 -> eps_0, eps_{-1}
    f[2, 2] = 1.0
    S = true_cov_linear(NonstationaryLinearSpec(f))
    assert S[0, 1] == pytest.approx(1.0, abs=1e-15)


def test_covariance_psd_and_symmetric():
    for seed in range(10):
        spec = random_spec(int(5 + seed), 3, seed)
        S = true_cov_linear(spec)
        assert np.array_equal(S, S.T)
        assert np.linalg.eigvalsh(S).min() >= -1e-10


@pytest.mark.parametrize("dist", ["normal", "uniform", "rademacher"])
def test_cov_products_match_brute_force_moments(dist):
    spec = random_spec(4, 1, seed=21, dist=dist)
    S = true_cov_linear(spec)
    mu4 = FOURTH_MOMENT[dist]
    for idx in [(0, 1, 2, 3), (0, 1, 0, 1), (1, 1, 2, 3), (2, 2, 2, 2), (0, 3, 1, 3)]:
        i, j, k, l = idx
        expected = brute_fourth_moment(spec, idx, mu4) - S[i, j] * S[k, l]
        assert cov_products(spec, *idx) == pytest.approx(expected, abs=1e-12)


def test_cum4_symmetry_and_special_cases():
    spec = random_spec(5, 2, seed=4, dist="uniform")
    base = cum4_linear(spec, 0, 1, 3, 4)
    for perm in itertools.permutations((0, 1, 3, 4)):
        assert cum4_linear(spec, *perm) == base
    gauss = random_spec(5, 2, seed=4)
    assert cum4_linear(gauss, 0, 1, 3, 4) == 0.0
    iid = IIDSpec(InnovationDist("uniform")).process(4)
    assert cum4_linear(iid, 2, 2, 2, 2) == pytest.approx(-1.2)
    assert cum4_linear(iid, 0, 1, 1, 1) == 0.0


def test_gaussian_iid_cov_products():
    iid = IIDSpec().process(4)
    assert cov_products(iid, 0, 1, 2, 3) == 0.0
    assert cov_products(iid, 0, 1, 0, 1) == 1.0
    assert true_tau_linear(iid, 0, 1) == 1.0
    assert true_tau_linear(iid, 2, 2) == 2.0


def test_tau_equals_cov_products_diagonal():
    spec = random_spec(6, 2, seed=9, dist="uniform")
    for i in range(6):
        for j in range(6):
            assert true_tau_linear(spec, i, j) == cov_products(spec, i, j, i, j)


def test_rademacher_boundary():
    iid = IIDSpec(InnovationDist("rademacher")).process(3)
    assert true_tau_linear(iid, 0, 1) == 1.0
    with pytest.raises(Kappa4Boundary):
        true_tau_linear(iid, 1, 1)


def test_tau_positive_above_boundary():
    for dist in ("uniform", "normal"):
        spec = random_spec(5, 2, seed=14, dist=dist)
        for i in range(5):
            for j in range(5):
                assert true_tau_linear(spec, i, j) > 0
    # Gaussian: tau_ij = 1 + sigma_ij^2 for unit variances
    spec = random_spec(5, 2, seed=15)
    S = true_cov_linear(spec)
    assert true_tau_linear(spec, 1, 3) == pytest.approx(1 + S[1, 3] ** 2, abs=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_empirical_covariance_converges(seed):
    spec = random_spec(5, 2, seed=30 + seed)
    X = gen_nonstationary_linear(100_000, 5, spec, seed=seed)
    err = np.abs(sample_covariance(X) - true_cov_linear(spec)).max()
    assert err < 0.015
    assert np.abs(np.diag(sample_covariance(X)) - 1).max() < 0.015


def test_gaussian_spec_covariance():
    g = 0.5 ** np.arange(6)
    spec = GaussianSpec.from_autocov(g)
    proc = spec.process()
    np.testing.assert_allclose(proc.covariance(), spec.cov, atol=1e-14)
    X = proc.generate(50_000, seed=4)
    assert np.abs(sample_covariance(X) - spec.cov).max() < 0.03
