"""Plug-in predictiveness measures and their estimated influence functions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import learners
from .errors import MeasurementError
from .panel import FoldAssignment, LongitudinalDataset

MEASURES = ("AUC", "RSquared", "Accuracy")
_ALIASES = {"auc": "AUC", "r2": "RSquared", "rsquared": "RSquared", "r_squared": "RSquared", "accuracy": "Accuracy"}


@dataclass(frozen=True)
class PredictivenessMeasure:
    kind: str = "AUC"
    threshold: float = 0.5

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ValueError(f"unknown measure {self.kind!r}; expected one of {MEASURES}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        object.__setattr__(self, "kind", kind)

    @property
    def binary(self) -> bool:
        return self.kind in ("AUC", "Accuracy")

    def __call__(self, pred, y) -> "PredictivenessEstimate":
        if self.kind == "AUC":
            return estimate_auc(pred, y)
        if self.kind == "RSquared":
            return estimate_r2(pred, y)
        return estimate_accuracy(pred, y, self.threshold)


@dataclass(frozen=True)
class PredictivenessEstimate:
    """A predictiveness value with one influence value per subject.

    For cross-fit estimates, ``eif`` has length ``n`` of the full panel and
    is zero for subjects outside the half that was evaluated.
    """

    value: float
    eif: np.ndarray
    measure: PredictivenessMeasure
    folds_used: dict = field(default_factory=dict)


def _center(e: np.ndarray) -> np.ndarray:
    return e - e.mean()


def _check_pair(pred, y):
    pred = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred.shape != y.shape:
        raise ValueError(f"prediction and outcome lengths differ: {pred.size} vs {y.size}")
    if y.size == 0:
        raise MeasurementError("empty evaluation set")
    return pred, y


def _midpoint_counts(sorted_ref: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Twice the (tie-midpoint) count of reference scores below each ``s``."""
    lo = np.searchsorted(sorted_ref, s, side="left")
    hi = np.searchsorted(sorted_ref, s, side="right")
    return lo + hi


def estimate_auc(scores, y) -> PredictivenessEstimate:
    """Tie-corrected Mann-Whitney AUC and its influence function.

    Ties between a case and a control receive half credit, both in the
    statistic and in the within-class empirical CDFs used by the influence
    function.
    """
    s, y = _check_pair(scores, y)
    if not np.all((y == 0) | (y == 1)):
        raise MeasurementError("AUC requires a binary outcome")
    case = y == 1
    n1 = int(case.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise MeasurementError("AUC undefined: only one outcome class present; skip this fold")
    s1 = np.sort(s[case])
    s0 = np.sort(s[~case])
    below = _midpoint_counts(s0, s[case])  # 2 * n0 * F0(s_i) for cases
    auc = float(below.sum()) / (2.0 * n0 * n1)
    pi1 = n1 / y.size
    pi0 = n0 / y.size
    eif = np.empty(y.size)
    eif[case] = (below / (2.0 * n0) - auc) / pi1
    above = 2 * n1 - _midpoint_counts(s1, s[~case])  # 2 * n1 * (1 - F1(s_j)) for controls
    eif[~case] = (above / (2.0 * n1) - auc) / pi0
    return PredictivenessEstimate(auc, _center(eif), PredictivenessMeasure("AUC"))


def estimate_r2(pred, y) -> PredictivenessEstimate:
    """``1 - MSE / Var(Y)`` with the ratio delta-method influence function."""
    f, y = _check_pair(pred, y)
    resid2 = (y - f) ** 2
    dev2 = (y - y.mean()) ** 2
    mse = resid2.mean()
    var = dev2.mean()
    if var <= 0:
        raise MeasurementError("R-squared undefined: outcome has zero variance")
    value = 1.0 - mse / var
    eif = -((resid2 - mse) - (mse / var) * (dev2 - var)) / var
    return PredictivenessEstimate(float(value), _center(eif), PredictivenessMeasure("RSquared"))


def estimate_accuracy(pred, y, threshold: float = 0.5) -> PredictivenessEstimate:
    f, y = _check_pair(pred, y)
    correct = ((f > threshold).astype(float) == y).astype(float)
    value = float(correct.mean())
    return PredictivenessEstimate(value, _center(correct - value), PredictivenessMeasure("Accuracy", threshold))


def crossfit_predictiveness(
    data: LongitudinalDataset,
    columns,
    spec: learners.LearnerSpec,
    measure: PredictivenessMeasure,
    folds: FoldAssignment,
    half: int,
    t: int,
    seed=None,
) -> PredictivenessEstimate:
    """Cross-fit predictiveness of ``columns`` at timepoint ``t`` within one half.

    For each fold ``k`` present in the half, the learner is trained on the
    half's remaining folds and the measure is evaluated on fold ``k``. The
    value is the average of the fold-level values. The returned influence
    vector is weighted so that its full-sample mean is the first-order
    expansion of that average: a subject in fold ``k`` carries
    ``n / (K_used * n_k)`` times its fold-level influence value.
    """
    columns = tuple(int(c) for c in columns)
    X = data.features[t][:, columns]
    y = data.outcomes[t]
    n = data.n
    in_half = folds.half_of == half
    ks = folds.folds_in_half(half)
    if not in_half.any():
        raise MeasurementError(f"half {half} contains no subjects")
    base_ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(0 if seed is None else seed)
    if len(ks) < 2:
        # too few subjects to cross-fit: evaluate in-sample and flag it
        model = learners.fit(spec, X[in_half], y[in_half], learners.child_seed(base_ss, 0))
        est = measure(learners.predict(model, X[in_half]), y[in_half])
        eif = np.zeros(n)
        eif[in_half] = est.eif * n / in_half.sum()
        used = {"half": half, "folds": list(ks), "K_used": 0, "in_sample": "fewer than two folds in this half"}
        return PredictivenessEstimate(est.value, eif, measure, used)
    values, kept, skipped, fold_eifs = [], [], [], []
    for k in ks:
        test = in_half & (folds.fold_of == k)
        train = in_half & (folds.fold_of != k)
        model = learners.fit(spec, X[train], y[train], learners.child_seed(base_ss, k))
        pred = learners.predict(model, X[test])
        try:
            est = measure(pred, y[test])
        except MeasurementError as exc:
            skipped.append({"fold": k, "reason": str(exc)})
            continue
        values.append(est.value)
        kept.append(k)
        fold_eifs.append((test, est.eif))
    if not kept:
        raise MeasurementError(f"every fold was skipped at timepoint {t} in half {half}")
    K_used = len(kept)
    eif = np.zeros(n)
    for test, e in fold_eifs:
        eif[test] = e * n / (K_used * test.sum())
    used = {"half": half, "folds": kept, "K_used": K_used}
    if skipped:
        used["skipped"] = skipped
    return PredictivenessEstimate(float(np.mean(values)), eif, measure, used)
