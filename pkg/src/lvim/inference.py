"""Add-in and leave-out VIM trajectories with Wald inference.

The two predictiveness values in each contrast are cross-fit on opposite
halves of the subjects (the larger set on half 1, the smaller set on half
0). Zero importance then yields a nondegenerate test statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import learners
from .errors import MeasurementError
from .panel import FoldAssignment, LongitudinalDataset, TimeWindow, VariableSet
from .predictiveness import PredictivenessMeasure, crossfit_predictiveness
from .summaries import SummarySpec, summarize

VIM_KINDS = ("AddIn", "LeaveOut")
_VIM_ALIASES = {"addin": "AddIn", "add_in": "AddIn", "add-in": "AddIn", "leaveout": "LeaveOut", "leave_out": "LeaveOut", "leave-out": "LeaveOut"}
LARGER_HALF = 1
SMALLER_HALF = 0


def canonical_vim_kind(kind: str) -> str:
    try:
        return _VIM_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown VIM kind {kind!r}; expected one of {VIM_KINDS}") from None


@dataclass(frozen=True)
class VimTrajectory:
    """Per-timepoint VIM estimates over a window.

    ``eif_matrix[i, j]`` is subject ``i``'s influence value for the
    contrast at the ``j``-th timepoint of the window: the larger-set
    influence for subjects in half 1, minus the smaller-set influence for
    subjects in half 0, each already weighted by ``n / n_half``.
    """

    kind: str
    window: TimeWindow
    estimates: np.ndarray
    predictiveness_pair: np.ndarray  # (|window|, 2): larger, smaller
    eif_matrix: np.ndarray
    time_labels: np.ndarray
    measure: PredictivenessMeasure
    learner: dict
    variables: tuple = ()
    diagnostics: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.eif_matrix.shape[0]


@dataclass(frozen=True)
class InferenceResult:
    estimate: float
    se: float
    ci_lower: float
    ci_upper: float
    p_value: float
    alpha: float
    test_sidedness: str
    diagnostics: tuple = ()

    def as_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "se": self.se,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "test_sidedness": self.test_sidedness,
            "diagnostics": list(self.diagnostics),
        }


def z_quantile(q: float) -> float:
    return float(ndtri(q))


def wald(estimate: float, influence: np.ndarray, alpha: float = 0.05, sidedness: str = "greater") -> InferenceResult:
    """Wald interval and z-test from per-subject influence values.

    ``se = sd(influence) / sqrt(n)``. A zero standard error gives a
    degenerate interval at the estimate and a p-value of 1.
    """
    if sidedness not in ("greater", "two_sided"):
        raise ValueError("sidedness must be 'greater' or 'two_sided'")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    infl = np.asarray(influence, dtype=float)
    n = infl.size
    se = float(np.std(infl) / math.sqrt(n))
    if not se > 1e-15 * max(1.0, abs(estimate)):
        return InferenceResult(estimate, 0.0, estimate, estimate, 1.0, alpha, sidedness,
                               ("degenerate influence function: zero variance",))
    z = z_quantile(1 - alpha / 2)
    stat = estimate / se
    if sidedness == "greater":
        p = float(ndtr(-stat))
    else:
        p = float(2 * ndtr(-abs(stat)))
    return InferenceResult(estimate, se, estimate - z * se, estimate + z * se, min(p, 1.0), alpha, sidedness)


def _contrast_sets(varset: VariableSet, kind: str) -> tuple[tuple, tuple]:
    if kind == "AddIn":
        return varset.marginal, varset.base
    return varset.full, varset.residual


def estimate_trajectory(
    data: LongitudinalDataset,
    varset: VariableSet,
    spec: learners.LearnerSpec,
    measure: PredictivenessMeasure,
    folds: FoldAssignment,
    window: TimeWindow | None = None,
    seed=0,
    kind: str = "AddIn",
    cache: dict | None = None,
) -> VimTrajectory:
    """Cross-fit a VIM trajectory.

    Parameters
    ----------
    kind : {"AddIn", "LeaveOut"}
        Add-in contrasts marginal (``s`` plus base) against irreducible
        (base only) predictiveness; leave-out contrasts total (all
        features) against residual (all but ``s``).
    cache : dict, optional
        Shared across calls with the same data, folds, learner and seed to
        reuse predictiveness fits common to several variables (for example
        the base-set fit).
    """
    kind = canonical_vim_kind(kind)
    window = window or TimeWindow.full(data.T)
    window.validate(data.T)
    if folds.n != data.n:
        raise ValueError("fold assignment does not match the number of subjects")
    if measure.binary:
        data.require_binary()
    larger, smaller = _contrast_sets(varset, kind)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cache = {} if cache is None else cache
    m = len(window)
    est = np.empty(m)
    pairs = np.empty((m, 2))
    eif = np.empty((data.n, m))
    diagnostics = []

    def component(cols, half, t):
        key = (cols, half, t)
        if key not in cache:
            # the stream depends on (t, half) only, so shared components agree across variables
            cache[key] = crossfit_predictiveness(
                data, cols, spec, measure, folds, half, t, learners.child_seed(root, t, half)
            )
        return cache[key]

    for j, t in enumerate(window.indices):
        try:
            big = component(larger, LARGER_HALF, t)
            small = component(smaller, SMALLER_HALF, t)
        except MeasurementError as exc:
            raise MeasurementError(f"timepoint {t}: {exc}") from exc
        pairs[j] = big.value, small.value
        est[j] = big.value - small.value
        eif[:, j] = big.eif - small.eif
        eif[:, j] -= eif[:, j].mean()
        for part, e in (("larger", big), ("smaller", small)):
            if "skipped" in e.folds_used or "in_sample" in e.folds_used:
                diagnostics.append({"t": t, "component": part, **e.folds_used})
    return VimTrajectory(
        kind=kind,
        window=window,
        estimates=est,
        predictiveness_pair=pairs,
        eif_matrix=eif,
        time_labels=np.asarray(data.time_labels)[list(window.indices)],
        measure=measure,
        learner=spec.describe(),
        variables=varset.s,
        diagnostics=diagnostics,
    )


def estimate_addin_trajectory(data, varset, spec, measure, folds, window=None, seed=0, cache=None) -> VimTrajectory:
    return estimate_trajectory(data, varset, spec, measure, folds, window, seed, "AddIn", cache)


def estimate_leaveout_trajectory(data, varset, spec, measure, folds, window=None, seed=0, cache=None) -> VimTrajectory:
    return estimate_trajectory(data, varset, spec, measure, folds, window, seed, "LeaveOut", cache)


def infer_timepoint(traj: VimTrajectory, t: int, alpha: float = 0.05, sidedness: str = "greater") -> InferenceResult:
    """Inference for the VIM at timepoint index ``t`` (an index into the panel, not the window)."""
    if t not in traj.window.indices:
        raise ValueError(f"timepoint {t} outside window [{traj.window.t0}, {traj.window.t1}]")
    j = t - traj.window.t0
    return wald(float(traj.estimates[j]), traj.eif_matrix[:, j], alpha, sidedness)


def infer_summary(traj: VimTrajectory, summary, alpha: float = 0.05, window: TimeWindow | None = None) -> InferenceResult:
    """Delta-method inference for a summary of the VIM trajectory.

    Level-type summaries (mean, AUTC, GMRC) are tested one-sided against
    positive importance; the trend components two-sided. ``window``
    restricts the summary to a sub-window of the trajectory's window.
    """
    spec = SummarySpec.parse(summary)
    cols = slice(None)
    if window is not None:
        if window.t0 < traj.window.t0 or window.t1 > traj.window.t1:
            raise ValueError("summary window must lie inside the trajectory window")
        cols = slice(window.t0 - traj.window.t0, window.t1 - traj.window.t0 + 1)
    sv = summarize(spec, traj.estimates[cols], traj.time_labels[cols], gradient=True)
    influence = traj.eif_matrix[:, cols] @ sv.gradient
    return wald(sv.value, influence, alpha, spec.sidedness)


def summary_point(traj: VimTrajectory, summary) -> float:
    """Point estimate of a summary, available even where inference is not (GMRC, piecewise linear)."""
    spec = SummarySpec.parse(summary)
    return summarize(spec, traj.estimates, traj.time_labels, gradient=False).value
