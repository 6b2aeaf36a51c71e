"""
Summarizing a VIM trajectory
============================

A variable's importance can change over time. A trajectory of
per-timepoint importance values is condensed into a single number by a
summary: the mean, a linear trend, the area under the interpolated
curve (AUTC), or the geometric mean rate of change (GMRC).

This script builds three illustrative trajectories over five timepoints
and prints each summary under both interpolators.
"""

import numpy as np

from lvim.summaries import SummarySpec, check_monotone, summarize

t = np.arange(1.0, 6.0)
trajectories = {
    "rising": 0.1 * t,
    "constant": np.full(5, 0.8),
    "decaying": np.array([0.2, 0.1, 0.0, 0.0, 0.0]),
}

###############################################################################
# Every summary is a function of the node values. The mean, the trend
# coefficients and the AUTC are linear in them; the GMRC is not.

names = ["mean", "intercept", "slope", "autc:linear", "autc:spline", "gmrc:linear", "gmrc:spline"]
print(f"{'trajectory':>10}  " + "  ".join(f"{n:>11}" for n in names))
for label, v in trajectories.items():
    row = [summarize(SummarySpec.parse(n), v, t, gradient=False).value for n in names]
    print(f"{label:>10}  " + "  ".join(f"{x:11.4f}" for x in row))

###############################################################################
# The natural cubic spline overshoots where the decaying trajectory flattens
# out, so the spline AUTC is smaller than the trapezoid value and the curve is
# no longer monotone.

v = trajectories["decaying"]
print()
print("decaying, piecewise linear:", check_monotone(v, t, "PiecewiseLinear"))
print("decaying, natural spline:  ", check_monotone(v, t, "NaturalCubicSpline"))

###############################################################################
# Gradients drive the delta method. For the spline GMRC the gradient exists
# whenever no node derivative vanishes.

g = summarize(SummarySpec.parse("gmrc:spline"), v, t).gradient
print()
print("gradient of the spline GMRC at the decaying trajectory:", np.round(g, 4))
