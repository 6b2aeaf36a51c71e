"""Reference computations that share no code with the package.

Each function here recomputes a quantity from first principles (exact
rational arithmetic, double loops, scipy's own splines) so tests can
compare the package against an independent answer.
"""

from fractions import Fraction
from pathlib import Path
import json

import numpy as np
from scipy.interpolate import CubicSpline

FROZEN_PATH = Path(__file__).with_name("frozen_oracles.json")


def frozen():
    return json.loads(FROZEN_PATH.read_text())


def exact_mean(values):
    vals = [Fraction(str(v)) for v in values]
    return sum(vals) / len(vals)


def exact_ols(times, values):
    """Intercept and slope of the least-squares line, in rationals."""
    t = [Fraction(str(x)) for x in times]
    y = [Fraction(str(v)) for v in values]
    tb = sum(t) / len(t)
    yb = sum(y) / len(y)
    slope = sum((a - tb) * (b - yb) for a, b in zip(t, y)) / sum((a - tb) ** 2 for a in t)
    return yb - slope * tb, slope


def exact_trapezoid(times, values):
    t = [Fraction(str(x)) for x in times]
    y = [Fraction(str(v)) for v in values]
    return sum((t[i + 1] - t[i]) * (y[i] + y[i + 1]) / 2 for i in range(len(t) - 1))


def pl_gmrc(times, values):
    """Geometric mean of |slope| at the nodes; the last node reuses the final segment."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    seg = np.diff(y) / np.diff(t)
    d = np.append(seg, seg[-1])
    if np.any(d == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(np.abs(d)))))


def spline_autc(times, values):
    cs = CubicSpline(times, values, bc_type="natural")
    return float(cs.integrate(times[0], times[-1]))


def spline_gmrc(times, values):
    cs = CubicSpline(times, values, bc_type="natural")
    d = np.abs(cs(np.asarray(times, dtype=float), 1))
    return float(np.exp(np.mean(np.log(d))))


def brute_force_auc(scores, y):
    """Pairwise case/control comparison count with half credit for ties, as a Fraction."""
    cases = [s for s, lab in zip(scores, y) if lab == 1]
    controls = [s for s, lab in zip(scores, y) if lab == 0]
    total = Fraction(0)
    for a in cases:
        for b in controls:
            if a > b:
                total += 1
            elif a == b:
                total += Fraction(1, 2)
    return total / (len(cases) * len(controls))


def linear_gaussian_r2():
    """Population R-squared values for Y = 0.5 (W + U1) + 2 U2 + e, all terms independent N(0, 1)."""
    var_y = Fraction(1, 4) + Fraction(1, 4) + 4 + 1
    explained = {
        "total": Fraction(1, 4) + Fraction(1, 4) + 4,
        "residual": Fraction(1, 4) + Fraction(1, 4),
        "marginal": Fraction(1, 4) + 4,
        "irreducible": Fraction(1, 4),
    }
    return {k: v / var_y for k, v in explained.items()}


def finite_difference_gradient(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        step = h * max(1.0, abs(x[i]))
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g
