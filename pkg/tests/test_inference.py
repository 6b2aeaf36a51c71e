import numpy as np
import pytest

from lvim.errors import UnsupportedInferenceError
from lvim.inference import (
    canonical_vim_kind,
    estimate_addin_trajectory,
    estimate_leaveout_trajectory,
    estimate_trajectory,
    infer_summary,
    infer_timepoint,
    summary_point,
    wald,
    z_quantile,
)
from lvim.learners import LearnerSpec
from lvim.panel import TimeWindow, VariableSet, make_folds
from lvim.predictiveness import PredictivenessMeasure
from lvim.simulation import DgpConfig, generate

from oracles import frozen

AUC = PredictivenessMeasure("AUC")
GLM = LearnerSpec("Logistic")


@pytest.fixture(scope="module")
def study_data():
    data = generate(DgpConfig.standard(), 4000, 11)
    return data, make_folds(data.n, 5, 12)


def test_z_quantile():
    assert z_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-15)
    assert z_quantile(0.5) == 0.0


def test_wald_degenerate_influence():
    res = wald(0.0, np.zeros(50))
    assert (res.se, res.ci_lower, res.ci_upper, res.p_value) == (0.0, 0.0, 0.0, 1.0)
    assert res.diagnostics


def test_wald_standard_error_and_sidedness():
    rng = np.random.default_rng(0)
    infl = rng.standard_normal(10_000)
    res = wald(0.03, infl)
    assert abs(res.se / 0.01 - 1) < 0.05
    assert res.ci_upper - res.ci_lower == pytest.approx(2 * 1.959963984540054 * res.se, rel=1e-14)
    two = wald(0.03, infl, sidedness="two_sided")
    assert two.p_value == pytest.approx(2 * res.p_value, rel=1e-12)
    assert wald(-0.03, infl).p_value > 0.5
    with pytest.raises(ValueError):
        wald(0.0, infl, sidedness="less")
    with pytest.raises(ValueError):
        wald(0.0, infl, alpha=1.5)


def test_vim_kind_aliases():
    assert canonical_vim_kind("add-in") == "AddIn"
    assert canonical_vim_kind("leave_out") == "LeaveOut"
    with pytest.raises(ValueError):
        canonical_vim_kind("drop")


def test_trajectory_structure(study_data):
    data, folds = study_data
    traj = estimate_addin_trajectory(data, VariableSet((0,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=1)
    assert traj.estimates.shape == (4,) and traj.eif_matrix.shape == (data.n, 4)
    np.testing.assert_allclose(traj.estimates, traj.predictiveness_pair[:, 0] - traj.predictiveness_pair[:, 1])
    assert np.all(np.abs(traj.eif_matrix.mean(axis=0)) < 1e-10)
    np.testing.assert_array_equal(traj.time_labels, [1, 2, 3, 4])
    assert traj.diagnostics == []


def test_window_restricts_timepoints(study_data):
    data, folds = study_data
    vs = VariableSet((1,), (3, 4, 5, 6), 10)
    full = estimate_addin_trajectory(data, vs, GLM, AUC, folds, seed=2)
    part = estimate_addin_trajectory(data, vs, GLM, AUC, folds, TimeWindow(1, 2), seed=2)
    np.testing.assert_allclose(part.estimates, full.estimates[1:3], atol=1e-14)
    with pytest.raises(ValueError):
        infer_timepoint(part, 0)
    sub = infer_summary(full, "mean", window=TimeWindow(1, 2))
    assert sub.estimate == pytest.approx(full.estimates[1:3].mean(), abs=1e-15)


def test_single_timepoint_mean_equals_timepoint_inference(study_data):
    data, folds = study_data
    traj = estimate_addin_trajectory(data, VariableSet((2,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=3)
    for t in range(4):
        a = infer_summary(traj, "mean", window=TimeWindow(t, t))
        b = infer_timepoint(traj, t)
        assert a.estimate == pytest.approx(b.estimate, abs=1e-15)
        assert a.se == pytest.approx(b.se, rel=1e-12)
        assert a.p_value == pytest.approx(b.p_value, rel=1e-9, abs=1e-300)


def test_summary_sidedness(study_data):
    data, folds = study_data
    traj = estimate_addin_trajectory(data, VariableSet((1,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=4)
    assert infer_summary(traj, "mean").test_sidedness == "greater"
    assert infer_summary(traj, "slope").test_sidedness == "two_sided"
    assert infer_summary(traj, "autc").test_sidedness == "greater"


def test_gmrc_inference_requires_spline(study_data):
    data, folds = study_data
    traj = estimate_addin_trajectory(data, VariableSet((1,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=5)
    with pytest.raises(UnsupportedInferenceError):
        infer_summary(traj, "gmrc")
    assert summary_point(traj, "gmrc") > 0
    res = infer_summary(traj, "gmrc:spline")
    assert res.se > 0


def test_leaveout_with_empty_complement_equals_addin_with_empty_base(study_data):
    data, folds = study_data
    vs = VariableSet(tuple(range(10)), (), 10)
    a = estimate_addin_trajectory(data, vs, GLM, AUC, folds, seed=6)
    b = estimate_leaveout_trajectory(data, vs, GLM, AUC, folds, seed=6)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.eif_matrix, b.eif_matrix)


def test_mean_only_learner_gives_null_vim(study_data):
    data, folds = study_data
    traj = estimate_addin_trajectory(data, VariableSet((0,), (3,), 10), LearnerSpec("MeanOnly"), AUC, folds, seed=7)
    np.testing.assert_allclose(traj.estimates, 0.0, atol=1e-12)


def test_shared_cache_reuses_base_fit(study_data):
    data, folds = study_data
    cache = {}
    a = estimate_addin_trajectory(data, VariableSet((0,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=8, cache=cache)
    n_keys = len(cache)
    b = estimate_addin_trajectory(data, VariableSet((1,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=8, cache=cache)
    assert len(cache) == n_keys + 4  # only the marginal fits are new
    np.testing.assert_array_equal(a.predictiveness_pair[:, 1], b.predictiveness_pair[:, 1])


def test_seed_determinism(study_data):
    data, folds = study_data
    vs = VariableSet((0,), (3, 4, 5, 6), 10)
    a = estimate_trajectory(data, vs, GLM, AUC, folds, seed=9, kind="LeaveOut")
    b = estimate_trajectory(data, vs, GLM, AUC, folds, seed=9, kind="LeaveOut")
    np.testing.assert_array_equal(a.eif_matrix, b.eif_matrix)


def test_fold_mismatch_rejected(study_data):
    data, _ = study_data
    with pytest.raises(ValueError, match="fold"):
        estimate_addin_trajectory(data, VariableSet((0,), (3,), 10), GLM, AUC, make_folds(100, 5, 0))


@pytest.mark.slow
def test_large_sample_estimates_near_truth():
    data = generate(DgpConfig.standard(), 10_000, 31)
    folds = make_folds(data.n, 5, 32)
    truth = frozen()["reference_addin"]
    for v in (0, 1, 2, 7):
        traj = estimate_addin_trajectory(data, VariableSet((v,), (3, 4, 5, 6), 10), GLM, AUC, folds, seed=33)
        res = infer_summary(traj, "mean")
        target = np.mean(truth[str(v + 1)])
        assert abs(res.estimate - target) < 4 * res.se + 0.005
