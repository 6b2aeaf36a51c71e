import math

import numpy as np
import pytest

from lvim.learners import LearnerSpec
from lvim.panel import VariableSet
from lvim.predictiveness import PredictivenessMeasure
from lvim.simulation import (
    DgpConfig,
    Scenario,
    beta_at,
    conditional_mean_mc,
    default_beta,
    generate,
    oracle_truth,
    oracle_truths,
    run_replicate,
    run_study,
    seed_for,
    simple_r2_example,
    standard_normal,
    stream,
    true_conditional_mean,
    worker_count,
)

from oracles import frozen

AUC = PredictivenessMeasure("AUC")
BASE = (3, 4, 5, 6)


def test_beta_schedule_first_rows():
    B = default_beta(4)
    np.testing.assert_allclose(B[0, :3], [2.0, 2.0, 1.5])
    np.testing.assert_allclose(B[1, :3], [2.0, 2.25, 2.0 - 1.0 / (1.0 + math.exp(-1.0))])
    np.testing.assert_allclose(B[:, 3:7], 0.05)
    np.testing.assert_allclose(B[:, 7:], 0.0)
    np.testing.assert_array_equal(default_beta(3, t_start=1), np.vstack([beta_at(1), beta_at(2), beta_at(3)]))
    with pytest.raises(ValueError):
        default_beta(0)


def test_streams_are_keyed_and_independent():
    a = stream(5, 1, 2).integers(0, 1 << 30, 4)
    b = stream(5, 1, 2).integers(0, 1 << 30, 4)
    c = stream(5, 2, 1).integers(0, 1 << 30, 4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert seed_for(5, 0) != seed_for(5, 1)
    assert 0 <= seed_for(5, 0) < 2**63


def test_standard_normal_moments():
    z = standard_normal(stream(0), 200_000)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


def test_generate_shapes_and_determinism():
    cfg = DgpConfig.standard()
    a, b = generate(cfg, 50, 3), generate(cfg, 50, 3)
    assert (a.n, a.T, a.p) == (50, 4, 10)
    np.testing.assert_array_equal(a.features, b.features)
    assert set(np.unique(a.outcomes)) <= {0.0, 1.0}


def test_zero_coefficients_give_balanced_outcomes():
    cfg = DgpConfig(np.zeros((2, 10)))
    data = generate(cfg, 40_000, 1)
    assert abs(data.outcomes.mean() - 0.5) < 0.01


def test_uncorrelated_design_has_independent_timepoints():
    data = generate(DgpConfig.standard(), 20_000, 2)
    X = data.features
    assert abs(np.corrcoef(X[0, :, 0], X[1, :, 0])[0, 1]) < 0.03
    assert abs(np.corrcoef(data.outcomes[0], data.outcomes[1])[0, 1]) < 0.03


def test_empirical_covariance_matches_model():
    cfg = DgpConfig.standard(rho=0.5)
    data = generate(cfg, 100_000, 3)
    for t in (0, 3):
        emp = np.cov(data.features[t], rowvar=False)
        np.testing.assert_allclose(emp, cfg.covariances()[t], atol=0.02)


def test_config_validation():
    with pytest.raises(ValueError):
        DgpConfig(np.zeros(10))
    with pytest.raises(ValueError):
        DgpConfig(np.zeros((2, 10)), rho=1.0)
    with pytest.raises(ValueError):
        DgpConfig(np.zeros((2, 10)), loaded=(0,), sources=(0, 1))


def test_closed_form_conditional_mean_matches_nested_monte_carlo():
    cfg = DgpConfig.standard(rho=0.5)
    data = generate(cfg, 200, 4)
    for cols in [(0, 3, 4, 5, 6), (3, 4, 5, 6), (1,), ()]:
        exact = true_conditional_mean(cfg, 2, cols, data.features[2])
        mc = conditional_mean_mc(cfg, 2, cols, data.features[2], draws=20_000, seed=5)
        np.testing.assert_allclose(exact, mc, atol=0.015)


@pytest.fixture(scope="module")
def truths():
    cfg = DgpConfig.standard()
    vs = [VariableSet((v,), BASE, 10) for v in (0, 1, 2, 7)]
    return oracle_truths(cfg, 200_000, 7, AUC, vs)


def test_oracle_null_variable_is_exactly_zero(truths):
    for kind in ("AddIn", "LeaveOut"):
        np.testing.assert_array_equal(truths[(kind, (7,))].values, 0.0)


def test_oracle_truths_nonnegative_and_ordered(truths):
    for v in (0, 1, 2):
        add, leave = truths[("AddIn", (v,))], truths[("LeaveOut", (v,))]
        assert np.all(add.values > 0) and np.all(leave.values > 0)
        assert np.all(add.values >= leave.values)


def test_oracle_matches_reference_truths_loosely(truths):
    pub = frozen()["reference_addin"]
    for v in (0, 1, 2):
        np.testing.assert_allclose(truths[("AddIn", (v,))].values, pub[str(v + 1)], atol=0.01)


def test_oracle_requires_large_sample():
    with pytest.raises(ValueError, match="1e5"):
        oracle_truth(DgpConfig.standard(), 1000, 0, AUC, VariableSet((0,), BASE, 10))


def test_simple_r2_example_small_sample():
    vals = simple_r2_example(N=200_000, seed=1)
    assert vals["total"] == pytest.approx(0.818, abs=0.01)
    assert vals["irreducible"] == pytest.approx(0.045, abs=0.01)
    assert vals["add_in"] == pytest.approx(vals["leave_out"], abs=0.01)


def test_worker_count_environment(monkeypatch):
    monkeypatch.setenv("LVIM_THREADS", "3")
    assert worker_count() == 3
    assert worker_count(1) == 1
    monkeypatch.setenv("LVIM_THREADS", "many")
    with pytest.raises(ValueError, match="LVIM_THREADS"):
        worker_count()


def _scenario(R, **kw):
    kw.setdefault("variables", (0, 7))
    kw.setdefault("vim_kinds", ("AddIn",))
    return Scenario(DgpConfig.standard(), 300, R, LearnerSpec("Logistic"), oracle_N=100_000, **kw)


FAKE_TRUTH = {(k, v, s): 0.1 for k in ("AddIn", "LeaveOut") for v in range(10) for s in ("mean", "trend_slope", "t1", "t2", "t3", "t4")}


def test_single_replicate_study_flags_undefined_se():
    rep = run_study(_scenario(1), 3, workers=1, truths=FAKE_TRUTH)
    row = rep.row("AddIn", 0, "mean")
    assert row.replicates == 1 and not row.empirical_se_defined
    assert row.coverage in (0.0, 1.0)


def test_study_aggregates_replicates_exactly():
    sc = _scenario(4, timepoints=True)
    rep = run_study(sc, 11, workers=1, truths=FAKE_TRUTH)
    recs = [run_replicate(sc, 11, r).records[("AddIn", 0, "mean")] for r in range(4)]
    est, lo, hi, p = np.array(recs).T
    row = rep.row("AddIn", 0, "mean")
    assert row.mean_est == pytest.approx(est.mean(), abs=1e-15)
    assert row.empirical_se == pytest.approx(est.std(ddof=1), abs=1e-15)
    assert row.coverage == np.mean((lo <= 0.1) & (0.1 <= hi))
    assert row.rejection_prop == np.mean(p < 0.05)
    assert rep.row("AddIn", 7, "t3").replicates == 4
    keys = [r.key for r in rep.rows]
    assert keys == sorted(keys)


def test_study_independent_of_worker_count():
    sc = _scenario(4)
    a = run_study(sc, 21, workers=1, truths=FAKE_TRUTH)
    b = run_study(sc, 21, workers=2, truths=FAKE_TRUTH)
    assert a == b


def test_scenario_validation():
    with pytest.raises(ValueError):
        _scenario(0)
    with pytest.raises(ValueError, match="2K"):
        Scenario(DgpConfig.standard(), 8, 1, LearnerSpec("Logistic"))
