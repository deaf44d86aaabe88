import numpy as np
import pytest
from scipy import stats

from covmax import montecarlo
from covmax.core import CovmaxError, DegenerateVariance, NullCovariance, PairIndexSet, gumbel_cdf, run_test
from covmax.montecarlo import (
    StudyAborted,
    StudyConfig,
    convergence_sweep,
    replication_seed,
    resolve_threads,
    run_study,
)
from covmax.specio import SchemaError, build_process, dumps, to_jsonable, validate
from covmax.structure import test_covariance


def small_cfg(**kw):
    base = dict(generator={"type": "iid"}, test={"name": "independence"}, replications=40, n=60, m=6, master_seed=9)
    base.update(kw)
    return StudyConfig(**base)


def test_single_replication_is_one_test_call():
    cfg = small_cfg(replications=1)
    s = run_study(cfg, threads=1)
    X = build_process(cfg.generator, cfg.m).generate(cfg.n, np.random.default_rng(replication_seed(9, 0)))
    res = run_test(X, NullCovariance.zero(), PairIndexSet.strict(6))
    assert s.y_values.tolist() == [res.normalized]
    assert s.p_values.tolist() == [res.p_value]


def test_same_config_is_bitwise_identical():
    a = run_study(small_cfg(), threads=2)
    b = run_study(small_cfg(), threads=2)
    assert a == b
    assert a.y_values.tobytes() == b.y_values.tobytes()
    assert dumps(a.to_dict()) == dumps(b.to_dict())


@pytest.mark.parametrize("test", [{"name": "independence"}, {"name": "stationarity"}, {"name": "bandedness", "band": 1}])
def test_results_independent_of_thread_count(test):
    cfg = small_cfg(test=test, replications=30)
    one = run_study(cfg, threads=1)
    four = run_study(cfg, threads=4)
    assert one.y_values.tobytes() == four.y_values.tobytes()
    assert one.p_values.tobytes() == four.p_values.tobytes()


def test_master_seed_changes_results():
    assert not np.array_equal(run_study(small_cfg()).y_values, run_study(small_cfg(master_seed=10)).y_values)


def test_p_and_y_related_pointwise():
    s = run_study(small_cfg(replications=50))
    np.testing.assert_allclose(s.p_values, 1 - gumbel_cdf(s.y_values), rtol=0, atol=1e-12)
    for a, r in s.rejection_rates.items():
        assert r == np.mean(s.p_values <= a)
    assert s.ks_to_gumbel == pytest.approx(stats.kstest(s.y_values, gumbel_cdf).statistic, abs=1e-14)


def test_summary_documents_validate():
    s = run_study(small_cfg(replications=5))
    d = to_jsonable(s.to_dict())
    validate(d, "study_summary")
    assert "runtime_seconds" not in d
    assert "runtime_seconds" in s.to_dict(include_runtime=True)
    assert s.replication_rows().shape == (5, 3)
    x, F, G = s.ecdf_rows().T
    assert np.all(np.diff(x) >= 0) and F[-1] == 1.0
    np.testing.assert_allclose(G, gumbel_cdf(x))


def test_config_validation():
    with pytest.raises(SchemaError):
        small_cfg(replications=0)
    with pytest.raises(SchemaError):
        small_cfg(nominal_levels=(0.05, 1.0))
    with pytest.raises(SchemaError):
        small_cfg(test={"name": "bandedness"})
    cfg = small_cfg()
    assert StudyConfig.from_dict(cfg.to_dict()) == cfg


def test_custom_truth_uses_generator_covariance():
    gen = {"type": "stationary_linear", "coeffs": [1.0, 0.6]}
    cfg = small_cfg(generator=gen, test={"name": "custom", "sigma0": "truth"}, replications=3)
    s = run_study(cfg, threads=1)
    proc = build_process(gen, 6)
    X = proc.generate(60, np.random.default_rng(replication_seed(9, 2)))
    assert s.y_values[2] == test_covariance(X, proc.covariance()).normalized


def test_dimension_mismatch():
    with pytest.raises(CovmaxError):
        run_study(small_cfg(generator={"type": "gaussian", "cov": np.eye(4).tolist()}))


def flaky_test(fail_on):
    def make(spec, truth=None):
        def run(X):
            # replication identity from the data: first entry is unique per stream
            if X[0, 0] in fail_on:
                raise DegenerateVariance((0, 1), 0.0, 1e-12)
            return run_test(X, NullCovariance.zero(), PairIndexSet.strict(X.shape[1]))

        return run

    return make


def first_entries(cfg):
    proc = build_process(cfg.generator, cfg.m)
    return [proc.generate(cfg.n, np.random.default_rng(replication_seed(cfg.master_seed, r)))[0, 0] for r in range(cfg.replications)]


def test_failed_replications_are_recorded(monkeypatch):
    cfg = small_cfg(replications=200)
    heads = first_entries(cfg)
    monkeypatch.setattr(montecarlo, "make_test", flaky_test({heads[17], heads[101]}))
    s = run_study(cfg, threads=3)
    assert s.failures == 2
    assert np.isnan(s.y_values[17]) and np.isnan(s.p_values[101])
    ok = np.isfinite(s.p_values)
    assert s.rejection_rates[0.05] == np.mean(s.p_values[ok] <= 0.05)
    validate(to_jsonable(s.to_dict()), "study_summary")


def test_too_many_failures_abort(monkeypatch):
    cfg = small_cfg(replications=200)
    heads = first_entries(cfg)
    monkeypatch.setattr(montecarlo, "make_test", flaky_test(set(heads[:3])))
    with pytest.raises(StudyAborted):
        run_study(cfg, threads=2)


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("COVMAX_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(5) == 5
    monkeypatch.delenv("COVMAX_THREADS")
    assert resolve_threads(None) >= 1
    with pytest.raises(CovmaxError):
        resolve_threads(0)


def test_sweep_identical_configs_give_identical_rows():
    rows = convergence_sweep([small_cfg(), small_cfg()], threads=2)
    assert rows[0].ks_to_gumbel == rows[1].ks_to_gumbel
    assert rows[0].rejection_rates == rows[1].rejection_rates
    assert not rows[1].non_improvement
    with pytest.raises(CovmaxError):
        convergence_sweep([small_cfg()])


@pytest.mark.slow
def test_null_p_values_uniform_histogram():
    # up to three master seeds; the property asks for one passing seed
    crit = stats.chi2.ppf(0.999, 19)
    chis = []
    for seed in range(3):
        cfg = StudyConfig({"type": "iid"}, {"name": "independence"}, 2000, 500, 30, master_seed=seed)
        h, _ = np.histogram(run_study(cfg).p_values, bins=20, range=(0, 1))
        chis.append(float(np.sum((h - 100.0) ** 2 / 100.0)))
        if chis[-1] < crit:
            break
    assert chis[-1] < crit, f"chi-square {chis} vs {crit:.2f}"
