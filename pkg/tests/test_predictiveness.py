import numpy as np
import pytest
from scipy.stats import norm

from lvim import learners
from lvim.errors import MeasurementError
from lvim.learners import LearnerSpec
from lvim.panel import FoldAssignment, LongitudinalDataset, make_folds
from lvim.predictiveness import (
    PredictivenessMeasure,
    crossfit_predictiveness,
    estimate_accuracy,
    estimate_auc,
    estimate_r2,
)
from lvim.simulation import DgpConfig, generate

from oracles import frozen


def test_auc_examples():
    assert estimate_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]).value == 1.0
    assert estimate_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]).value == 0.75
    assert estimate_auc([0.3] * 6, [0, 1, 0, 1, 1, 0]).value == 0.5


def test_auc_matches_frozen_enumeration():
    for case in frozen()["auc_cases"]:
        assert estimate_auc(case["scores"], case["y"]).value == case["auc"]


def test_auc_invariant_to_increasing_transform():
    rng = np.random.default_rng(0)
    s = rng.standard_normal(300)
    y = (rng.random(300) < 0.4).astype(float)
    a = estimate_auc(s, y)
    b = estimate_auc(np.exp(3 * s) + 7, y)
    assert a.value == b.value
    np.testing.assert_allclose(a.eif, b.eif, atol=1e-15)


def test_auc_single_class_is_measurement_error():
    with pytest.raises(MeasurementError, match="one outcome class"):
        estimate_auc([0.1, 0.2], [1, 1])


def _jackknife_influence(stat, pred, y):
    n = len(y)
    full = stat(pred, y)
    loo = np.array([stat(np.delete(pred, i), np.delete(y, i)) for i in range(n)])
    return (n - 1) * (full - loo)


def _pairwise_auc(s, y):
    cases, controls = s[y == 1], s[y == 0]
    d = cases[:, None] - controls[None, :]
    return ((d > 0) + 0.5 * (d == 0)).mean()


def test_auc_eif_matches_jackknife():
    rng = np.random.default_rng(1)
    n = 600
    y = (rng.random(n) < 0.35).astype(float)
    s = np.round(y * 0.8 + rng.standard_normal(n), 1)  # rounding creates ties
    est = estimate_auc(s, y)
    jk = _jackknife_influence(_pairwise_auc, s, y)
    assert abs(est.value - _pairwise_auc(s, y)) < 1e-15
    np.testing.assert_allclose(est.eif, jk - jk.mean(), atol=0.02)


def test_auc_variance_matches_hanley_mcneil():
    rng = np.random.default_rng(2)
    n = 20000
    y = (rng.random(n) < 0.3).astype(float)
    s = y * 1.0 + rng.standard_normal(n)
    est = estimate_auc(s, y)
    A = est.value
    n1, n0 = y.sum(), n - y.sum()
    q1, q2 = A / (2 - A), 2 * A * A / (1 + A)
    hm = (A * (1 - A) + (n1 - 1) * (q1 - A * A) + (n0 - 1) * (q2 - A * A)) / (n1 * n0)
    se = est.eif.std() / np.sqrt(n)
    assert abs(se / np.sqrt(hm) - 1) < 0.10


def test_r2_examples():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(50)
    assert estimate_r2(y, y).value == 1.0
    assert abs(estimate_r2(np.full(50, y.mean()), y).value) < 1e-15
    with pytest.raises(MeasurementError, match="zero variance"):
        estimate_r2(np.zeros(5), np.ones(5))


def test_r2_eif_matches_jackknife():
    rng = np.random.default_rng(4)
    n = 500
    x = rng.standard_normal(n)
    y = x + rng.standard_normal(n)
    f = 0.8 * x

    def r2(pred, yy):
        return 1 - np.mean((yy - pred) ** 2) / np.var(yy)

    est = estimate_r2(f, y)
    jk = _jackknife_influence(r2, f, y)
    # the jackknife carries O(1/n) curvature terms, visible on the largest residuals
    np.testing.assert_allclose(est.eif, jk - jk.mean(), rtol=0.05, atol=0.02)


def test_r2_linear_in_prediction_to_first_order():
    # the residual functional's directional derivative equals the EIF-weighted combination
    rng = np.random.default_rng(5)
    y = rng.standard_normal(400)
    f1, f2 = y + rng.standard_normal(400), 0.5 * y
    h = 1e-6
    mse = lambda f: np.mean((y - f) ** 2)
    d_num = (mse(f1 + h * (f2 - f1)) - mse(f1 - h * (f2 - f1))) / (2 * h)
    d_exact = np.mean(-2 * (y - f1) * (f2 - f1))
    assert abs(d_num - d_exact) < 1e-8


def test_accuracy_examples():
    est = estimate_accuracy([0.9, 0.1, 0.7], [1, 0, 1])
    assert est.value == 1.0 and np.all(est.eif == 0)
    half = estimate_accuracy([0.9, 0.9, 0.1, 0.1], [1, 0, 1, 0])
    assert half.value == 0.5
    assert sorted(half.eif.tolist()) == [-0.5, -0.5, 0.5, 0.5]
    assert estimate_accuracy([0.4, 0.6, 0.2], [0, 1, 1]).value == pytest.approx(2 / 3, abs=1e-15)
    assert estimate_accuracy([0.4, 0.6], [1, 1], threshold=0.3).value == 1.0


@pytest.mark.parametrize("measure", ["AUC", "RSquared", "Accuracy"])
def test_eif_means_vanish(measure):
    rng = np.random.default_rng(6)
    y = (rng.random(1001) < 0.6).astype(float)
    pred = np.clip(y * 0.3 + rng.random(1001) * 0.7, 0, 1)
    est = PredictivenessMeasure(measure)(pred, y)
    assert abs(est.eif.mean()) < 1e-10


def test_measure_spec_validation():
    assert PredictivenessMeasure("r2").kind == "RSquared"
    with pytest.raises(ValueError):
        PredictivenessMeasure("deviance")
    with pytest.raises(ValueError):
        PredictivenessMeasure("Accuracy", threshold=1.0)


def _panel(X, y):
    return LongitudinalDataset(np.asarray(X, float)[None], np.asarray(y, float)[None])


def test_crossfit_mean_only_accuracy_by_hand():
    rng = np.random.default_rng(7)
    n = 60
    y = (rng.random(n) < 0.45).astype(float)
    data = _panel(rng.standard_normal((n, 2)), y)
    folds = make_folds(n, 3, 1)
    est = crossfit_predictiveness(data, (0, 1), LearnerSpec("MeanOnly"), PredictivenessMeasure("Accuracy"), folds, 1, 0)
    expected = []
    for k in range(3):
        test = (folds.half_of == 1) & (folds.fold_of == k)
        train = (folds.half_of == 1) & (folds.fold_of != k)
        guess = float(y[train].mean() > 0.5)
        expected.append(np.mean(y[test] == guess))
    assert est.value == pytest.approx(np.mean(expected), abs=1e-15)
    assert est.folds_used == {"half": 1, "folds": [0, 1, 2], "K_used": 3}
    assert np.all(est.eif[folds.half_of == 0] == 0)


def test_crossfit_duplicated_folds_equal_plugin():
    rng = np.random.default_rng(8)
    m = 40
    Xb = rng.standard_normal((m, 2))
    yb = (rng.random(m) < 1 / (1 + np.exp(-Xb[:, 0]))).astype(float)
    # half 1 holds two identical folds; half 0 holds two other identical folds
    X = np.vstack([Xb, Xb, Xb, Xb])
    y = np.concatenate([yb, yb, yb, yb])
    folds = FoldAssignment(np.repeat([0, 1, 0, 1], m), np.repeat([1, 1, 0, 0], m), K=2)
    data = _panel(X, y)
    spec = LearnerSpec("Logistic")
    est = crossfit_predictiveness(data, (0, 1), spec, PredictivenessMeasure("AUC"), folds, 1, 0)
    model = learners.fit(spec, Xb, yb)
    plug = estimate_auc(learners.predict(model, Xb), yb)
    assert est.value == pytest.approx(plug.value, abs=1e-12)
    # each evaluated subject carries n / (K * n_k) = 2 times its fold-level influence
    np.testing.assert_allclose(est.eif[:m], 2 * plug.eif, atol=1e-12)
    np.testing.assert_allclose(est.eif[m : 2 * m], 2 * plug.eif, atol=1e-12)
    assert np.all(est.eif[2 * m :] == 0)
    assert abs(est.eif.mean()) < 1e-12


def test_crossfit_skips_single_class_fold():
    n = 40
    X = np.arange(n, dtype=float)[:, None]
    y = np.tile([0.0, 1.0], n // 2)
    fold = np.repeat([0, 1, 2, 3], n // 4)
    half = np.zeros(n, dtype=int)
    y[fold == 3] = 1.0
    est = crossfit_predictiveness(_panel(X, y), (0,), LearnerSpec("Logistic"), PredictivenessMeasure("AUC"),
                                  FoldAssignment(fold, half, K=4), 0, 0)
    assert est.folds_used["K_used"] == 3
    assert est.folds_used["skipped"][0]["fold"] == 3
    assert np.all(est.eif[fold == 3] == 0)
    # three used folds of 10 subjects: weight n / (K_used * n_k) = 4/3
    np.testing.assert_allclose(est.eif[fold != 3].mean(), 0, atol=1e-12)


def test_crossfit_all_folds_skipped_raises():
    n = 20
    data = _panel(np.zeros((n, 1)), np.ones(n))
    folds = make_folds(n, 2, 0)
    with pytest.raises(MeasurementError, match="every fold"):
        crossfit_predictiveness(data, (0,), LearnerSpec("MeanOnly"), PredictivenessMeasure("AUC"), folds, 0, 0)


def test_crossfit_tiny_half_evaluates_in_sample():
    data = _panel([[0.0], [1.0]], [0.0, 1.0])
    folds = make_folds(2, 2, 0)
    est = crossfit_predictiveness(data, (0,), LearnerSpec("MeanOnly"), PredictivenessMeasure("Accuracy"), folds, 0, 0)
    assert "in_sample" in est.folds_used
    assert np.all(est.eif == 0)


def test_crossfit_total_auc_matches_oracle_and_pooling():
    config = DgpConfig.standard()
    data = generate(config, 5000, 21)
    folds = make_folds(5000, 5, 2)
    spec = LearnerSpec("Logistic")
    full = tuple(range(10))
    est = crossfit_predictiveness(data, full, spec, PredictivenessMeasure("AUC"), folds, 1, 0)
    big = generate(config, 500_000, 99)
    truth = estimate_auc(norm.cdf(big.features[0] @ config.beta[0]), big.outcomes[0]).value
    assert abs(est.value - truth) < 0.01
    # fold-averaged and pooled AUC agree closely at this sample size
    X, y = data.features[0], data.outcomes[0]
    pooled = np.empty(5000)
    mask = folds.half_of == 1
    for k in range(5):
        test, train = mask & (folds.fold_of == k), mask & (folds.fold_of != k)
        pooled[test] = learners.predict(learners.fit(spec, X[train], y[train]), X[test])
    assert abs(estimate_auc(pooled[mask], y[mask]).value - est.value) < 0.005
