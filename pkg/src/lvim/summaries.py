"""Summaries of a trajectory over a contiguous window and their gradients.

Every interpolator here is linear in the node values, so the spline and its
derivatives are represented as matrices acting on the trajectory. That
gives closed-form integrals and exact gradients for the delta method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedInferenceError

SUMMARY_KINDS = ("Mean", "LinearTrend", "AUTC", "GMRC")
INTERPOLATORS = ("PiecewiseLinear", "NaturalCubicSpline")
DERIVATIVE_FLOOR = 1e-8

_KIND_ALIASES = {
    "mean": "Mean",
    "average": "Mean",
    "lineartrend": "LinearTrend",
    "linear_trend": "LinearTrend",
    "trend": "LinearTrend",
    "slope": "LinearTrend",
    "intercept": "LinearTrend",
    "autc": "AUTC",
    "gmrc": "GMRC",
}
_INTERP_ALIASES = {
    "piecewiselinear": "PiecewiseLinear",
    "piecewise_linear": "PiecewiseLinear",
    "linear": "PiecewiseLinear",
    "naturalcubicspline": "NaturalCubicSpline",
    "natural_cubic_spline": "NaturalCubicSpline",
    "spline": "NaturalCubicSpline",
}


@dataclass(frozen=True)
class SummarySpec:
    """Which summary to compute.

    ``interpolator`` applies to AUTC and GMRC only; ``trend_component``
    (``"intercept"`` or ``"slope"``) to LinearTrend only.
    """

    kind: str
    interpolator: str | None = None
    trend_component: str | None = None

    def __post_init__(self):
        kind = _KIND_ALIASES.get(str(self.kind).lower().replace("-", "_"), None)
        if kind is None:
            raise ValueError(f"unknown summary {self.kind!r}; expected one of {SUMMARY_KINDS}")
        object.__setattr__(self, "kind", kind)
        interp = self.interpolator
        if kind in ("AUTC", "GMRC"):
            interp = _INTERP_ALIASES.get(str(interp or "PiecewiseLinear").lower())
            if interp is None:
                raise ValueError(f"unknown interpolator {self.interpolator!r}")
        elif interp is not None:
            raise ValueError(f"{kind} does not take an interpolator")
        object.__setattr__(self, "interpolator", interp)
        comp = self.trend_component
        if kind == "LinearTrend":
            comp = comp or "slope"
            if comp not in ("intercept", "slope"):
                raise ValueError("trend_component must be 'intercept' or 'slope'")
        elif comp is not None:
            raise ValueError(f"{kind} does not take a trend component")
        object.__setattr__(self, "trend_component", comp)

    @property
    def name(self) -> str:
        if self.kind == "LinearTrend":
            return f"trend_{self.trend_component}"
        if self.interpolator:
            return f"{self.kind.lower()}_{'linear' if self.interpolator == 'PiecewiseLinear' else 'spline'}"
        return self.kind.lower()

    @property
    def sidedness(self) -> str:
        return "two_sided" if self.kind == "LinearTrend" else "greater"

    @classmethod
    def parse(cls, raw) -> "SummarySpec":
        """Build from a name such as ``"mean"``, ``"slope"``, ``"autc:spline"`` or a dict."""
        if isinstance(raw, SummarySpec):
            return raw
        if isinstance(raw, dict):
            return cls(**raw)
        text = str(raw).strip().lower()
        name, _, interp = text.partition(":")
        if name in ("slope", "trend_slope"):
            return cls("LinearTrend", trend_component="slope")
        if name in ("intercept", "trend_intercept"):
            return cls("LinearTrend", trend_component="intercept")
        return cls(name, interpolator=interp or None)


@dataclass(frozen=True)
class SummaryValue:
    value: float
    gradient: np.ndarray | None


def _array(traj) -> np.ndarray:
    v = np.asarray(traj, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("summary of an empty window")
    return v


def _times(traj, times) -> np.ndarray:
    t = np.arange(1.0, traj.size + 1) if times is None else np.asarray(times, dtype=float).ravel()
    if t.shape != traj.shape:
        raise ValueError(f"{traj.size} values but {t.size} time labels")
    return t


def _strict_times(traj, times) -> np.ndarray:
    t = _times(traj, times)
    if t.size < 2:
        raise ValueError("at least two timepoints required")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time labels must be strictly increasing")
    return t


# ---------------------------------------------------------------------------
# mean and linear trend

def summarize_mean(traj) -> SummaryValue:
    v = _array(traj)
    return SummaryValue(float(v.mean()), np.full(v.size, 1.0 / v.size))


def trend_operator(times) -> np.ndarray:
    """The 2 x m matrix ``(U^T U)^{-1} U^T`` for design ``U = [1, t]``."""
    t = np.asarray(times, dtype=float)
    if t.size < 2 or np.ptp(t) == 0:
        raise ValueError("linear trend needs at least two distinct times")
    U = np.column_stack([np.ones_like(t), t])
    return np.linalg.solve(U.T @ U, U.T)


def summarize_linear_trend(traj, times=None) -> tuple[SummaryValue, SummaryValue]:
    """OLS intercept and slope of the trajectory on its time labels."""
    v = _array(traj)
    A = trend_operator(_times(v, times))
    coef = A @ v
    return SummaryValue(float(coef[0]), A[0].copy()), SummaryValue(float(coef[1]), A[1].copy())


# ---------------------------------------------------------------------------
# interpolators as linear operators

def _spline_second_derivatives(times) -> np.ndarray:
    """Matrix mapping node values to natural-spline second derivatives at the nodes."""
    m = times.size
    h = np.diff(times)
    M = np.zeros((m, m))
    if m < 3:
        return M
    A = np.zeros((m - 2, m - 2))
    R = np.zeros((m - 2, m))
    for i in range(1, m - 1):
        r = i - 1
        A[r, r] = 2.0 * (h[i - 1] + h[i])
        if r > 0:
            A[r, r - 1] = h[i - 1]
        if r < m - 3:
            A[r, r + 1] = h[i]
        R[r, i - 1] = 6.0 / h[i - 1]
        R[r, i] = -6.0 / h[i - 1] - 6.0 / h[i]
        R[r, i + 1] = 6.0 / h[i]
    M[1:-1] = np.linalg.solve(A, R)
    return M


def integral_weights(times, interpolator: str) -> np.ndarray:
    """Weights ``w`` with ``integral of h over [t_0, t_m] = w @ values``."""
    t = np.asarray(times, dtype=float)
    h = np.diff(t)
    w = np.zeros(t.size)
    w[:-1] += h / 2
    w[1:] += h / 2
    if interpolator == "NaturalCubicSpline":
        M = _spline_second_derivatives(t)
        # each segment contributes -h^3 (M_i + M_{i+1}) / 24
        c = np.zeros(t.size)
        c[:-1] += h**3 / 24
        c[1:] += h**3 / 24
        w = w - c @ M
    return w


def node_derivative_operator(times, interpolator: str) -> np.ndarray:
    """Matrix mapping node values to ``h'`` at each node.

    For the piecewise-linear interpolator the derivative at a node is the
    slope of the segment to its right, and of the last segment at the final
    node.
    """
    t = np.asarray(times, dtype=float)
    m = t.size
    h = np.diff(t)
    S = np.zeros((m - 1, m))
    S[np.arange(m - 1), np.arange(m - 1)] = -1.0 / h
    S[np.arange(m - 1), np.arange(1, m)] = 1.0 / h
    if interpolator == "PiecewiseLinear":
        return np.vstack([S, S[-1]])
    M = _spline_second_derivatives(t)
    D = np.zeros((m, m))
    # left end of segment i: slope - h (2 M_i + M_{i+1}) / 6
    D[:-1] = S - (h[:, None] / 6.0) * (2.0 * M[:-1] + M[1:])
    # right end of the last segment: slope + h (M_{m-2} + 2 M_{m-1}) / 6
    D[-1] = S[-1] + (h[-1] / 6.0) * (M[-2] + 2.0 * M[-1])
    return D


def derivative_on_grid(traj, times, interpolator: str, points_per_segment: int = 1000):
    """Evaluate ``h'`` on a fine grid within every segment, endpoints included."""
    v = _array(traj)
    t = _strict_times(v, times)
    h = np.diff(t)
    slopes = np.diff(v) / h
    u = np.linspace(0.0, 1.0, points_per_segment + 1)
    if interpolator == "PiecewiseLinear":
        return np.repeat(slopes, u.size)
    Mv = _spline_second_derivatives(t) @ v
    out = []
    for i in range(t.size - 1):
        x = u * h[i]  # distance from left node
        a = h[i] - x
        d = -Mv[i] * a**2 / (2 * h[i]) + Mv[i + 1] * x**2 / (2 * h[i]) + slopes[i] - (Mv[i + 1] - Mv[i]) * h[i] / 6
        out.append(d)
    return np.concatenate(out)


def evaluate_interpolator(traj, times, interpolator: str, x) -> np.ndarray:
    """Value of the interpolator at points ``x`` inside the node range."""
    v = _array(traj)
    t = _strict_times(v, times)
    x = np.asarray(x, dtype=float)
    i = np.clip(np.searchsorted(t, x, side="right") - 1, 0, t.size - 2)
    h = t[i + 1] - t[i]
    a = t[i + 1] - x
    b = x - t[i]
    if interpolator == "PiecewiseLinear":
        return (v[i] * a + v[i + 1] * b) / h
    Mv = _spline_second_derivatives(t) @ v
    return (
        Mv[i] * a**3 / (6 * h)
        + Mv[i + 1] * b**3 / (6 * h)
        + (v[i] / h - Mv[i] * h / 6) * a
        + (v[i + 1] / h - Mv[i + 1] * h / 6) * b
    )


# ---------------------------------------------------------------------------
# AUTC and GMRC

def summarize_autc(traj, times=None, interpolator: str = "PiecewiseLinear") -> SummaryValue:
    """Area under the interpolated trajectory between the first and last node."""
    v = _array(traj)
    t = _strict_times(v, times)
    w = integral_weights(t, SummarySpec("AUTC", interpolator).interpolator)
    return SummaryValue(float(w @ v), w)


def summarize_gmrc(traj, times=None, interpolator: str = "PiecewiseLinear", gradient: bool = False) -> SummaryValue:
    """Geometric mean of ``|h'|`` over the nodes.

    Any node with zero derivative gives a GMRC of exactly 0. The gradient
    is available only for the spline and only when every ``|h'|`` exceeds
    :data:`DERIVATIVE_FLOOR`; otherwise ``gradient=True`` raises
    :class:`~lvim.errors.UnsupportedInferenceError`.
    """
    v = _array(traj)
    t = _strict_times(v, times)
    interp = SummarySpec("GMRC", interpolator).interpolator
    D = node_derivative_operator(t, interp)
    d = D @ v
    ad = np.abs(d)
    # derivatives within rounding of zero (e.g. a constant fed through the spline) count as zero
    zero_tol = 64 * np.finfo(float).eps * max(float(np.max(np.abs(v))), 1e-300) / float(np.min(np.diff(t)))
    value = 0.0 if np.any(ad <= zero_tol) else float(np.exp(np.mean(np.log(ad))))
    if not gradient:
        return SummaryValue(value, None)
    if interp == "PiecewiseLinear":
        raise UnsupportedInferenceError(
            "GMRC gradient is zero almost everywhere under the piecewise-linear interpolator; "
            "use the spline interpolator for inference"
        )
    if np.any(ad <= DERIVATIVE_FLOOR):
        raise UnsupportedInferenceError(
            f"GMRC gradient undefined: |h'| <= {DERIVATIVE_FLOOR} at some node"
        )
    grad = value * (D / d[:, None]).mean(axis=0)
    return SummaryValue(value, grad)


def summarize(spec: SummarySpec, traj, times=None, gradient: bool = True) -> SummaryValue:
    """Dispatch on ``spec``; ``gradient=False`` permits GMRC point estimates without inference."""
    spec = SummarySpec.parse(spec)
    if spec.kind == "Mean":
        return summarize_mean(traj)
    if spec.kind == "LinearTrend":
        intercept, slope = summarize_linear_trend(traj, times)
        return intercept if spec.trend_component == "intercept" else slope
    if spec.kind == "AUTC":
        return summarize_autc(traj, times, spec.interpolator)
    return summarize_gmrc(traj, times, spec.interpolator, gradient=gradient)


def check_monotone(traj, times=None, interpolator: str = "PiecewiseLinear", tol: float = 1e-12) -> str:
    """Classify a trajectory as ``increasing``, ``decreasing``, ``flat`` or ``non_monotone``.

    The sign of ``h'`` is checked on a grid of 1000 points per segment. If
    it never changes sign, the direction is taken from the sign of the
    linear-trend slope.
    """
    v = _array(traj)
    t = _strict_times(v, times)
    interp = SummarySpec("AUTC", interpolator).interpolator
    d = derivative_on_grid(v, t, interp)
    scale = tol * max(1.0, float(np.max(np.abs(v))))
    if np.all(np.abs(d) <= scale):
        return "flat"
    if np.all(d >= -scale) or np.all(d <= scale):
        slope = summarize_linear_trend(v, t)[1].value
        return "increasing" if slope > 0 else "decreasing"
    return "non_monotone"
