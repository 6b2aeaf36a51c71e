"""Logistic regression by iteratively reweighted least squares, and OLS."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit, log_expit


def mean_nll(eta: np.ndarray, y: np.ndarray) -> float:
    # -[y log p + (1-y) log(1-p)] with p = expit(eta), computed stably
    return float(-np.mean(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def irls(X, y, ridge=0.0, tol=1e-8, max_iter=100):
    """Newton-Raphson for (optionally ridge-penalized) logistic regression.

    ``X`` must already contain the intercept column at index 0, which is
    never penalized. The objective is the mean negative log-likelihood plus
    ``ridge / 2 * ||beta[1:]||^2``. Convergence is declared when the relative
    change in objective is below ``tol``.

    Returns
    -------
    beta : ndarray
    n_iter : int
    converged : bool
    """
    n, q = X.shape
    pen = np.full(q, ridge)
    pen[0] = 0.0
    ybar = np.clip(y.mean(), 1e-10, 1 - 1e-10)
    beta = np.zeros(q)
    beta[0] = np.log(ybar / (1 - ybar))

    def objective(b):
        return mean_nll(X @ b, y) + 0.5 * float(np.sum(pen * b * b))

    obj = objective(beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(X @ beta)
        w = np.maximum(p * (1 - p), 1e-12)
        grad = X.T @ (y - p) / n - pen * beta
        H = (X.T * w) @ X / n + np.diag(pen)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # step halving guards against overshoot near separation
        for _ in range(30):
            cand = beta + step
            new_obj = objective(cand)
            if new_obj <= obj + 1e-14 * max(1.0, abs(obj)):
                break
            step = step / 2
        beta = cand
        change = abs(new_obj - obj) / (abs(new_obj) + 0.1)
        obj = new_obj
        if change < tol:
            converged = True
            break
    return beta, it, converged


def fit_logistic(X, y, tol=1e-8, max_iter=100, ridge=1e-6, separation_norm=1e3):
    """Fit unpenalized logistic regression, falling back to a small ridge.

    The fallback triggers when the coefficient norm exceeds
    ``separation_norm``, the signature of (quasi-)complete separation.
    Returns ``(intercept, coef, diagnostics)``.
    """
    X1 = np.column_stack([np.ones(len(y)), X])
    beta, n_iter, converged = irls(X1, y, 0.0, tol, max_iter)
    diag = {"iterations": n_iter, "converged": converged, "ridge": 0.0}
    if not np.all(np.isfinite(beta)) or np.linalg.norm(beta[1:]) > separation_norm:
        beta, n_iter, converged = irls(X1, y, ridge, tol, max_iter)
        diag = {"iterations": n_iter, "converged": converged, "ridge": ridge, "separation": True}
    if not converged:
        warnings.warn(f"IRLS did not converge in {max_iter} iterations", RuntimeWarning, stacklevel=3)
    return float(beta[0]), beta[1:].copy(), diag


def fit_linear(X, y):
    X1 = np.column_stack([np.ones(len(y)), X])
    beta, *_ = np.linalg.lstsq(X1, y, rcond=None)
    return float(beta[0]), beta[1:].copy(), {"converged": True}
