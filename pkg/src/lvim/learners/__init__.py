"""Estimators of the conditional mean outcome given a subset of features.

Every learner maps ``(spec, X, y, seed)`` to an immutable :class:`FittedModel`.
An empty column subset always degenerates to the intercept-only model.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .base import (
    DEFAULT_PARAMS,
    ENSEMBLE_KINDS,
    EPS,
    KINDS,
    FittedModel,
    LearnerSpec,
    canonical_kind,
    clamp,
    is_binary,
)
from .glm import fit_linear, fit_logistic
from .lasso import fit_lasso, lambda_max
from .stumps import fit_stumps, stump_scores

__all__ = [
    "EPS",
    "KINDS",
    "DEFAULT_PARAMS",
    "LearnerSpec",
    "FittedModel",
    "canonical_kind",
    "fit",
    "predict",
    "fit_stacked",
    "cv_loss",
    "lambda_max",
]


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(0 if seed is None else seed)


def child_seed(ss: np.random.SeedSequence, *keys: int) -> np.random.SeedSequence:
    """Deterministic sub-stream of ``ss`` addressed by integer keys."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in keys))


def _mean_model(y, n_features, binary, note=None) -> FittedModel:
    m = float(np.mean(y))
    diag = {"converged": True}
    if note:
        diag["note"] = note
    return FittedModel(kind="MeanOnly", n_features=n_features, binary=binary, intercept=m, diagnostics=diag)


def fit(spec: LearnerSpec, X, y, seed=None) -> FittedModel:
    """Fit ``spec`` to ``(X, y)``; deterministic given ``seed``.

    Parameters
    ----------
    spec : LearnerSpec
    X : array_like, shape (n, q)
        Features restricted to the requested variable set; ``q`` may be 0.
    y : array_like, shape (n,)
    seed : int or numpy.random.SeedSequence, optional
        Drives inner cross-validation splits (lasso, ensembles).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0] or X.shape[0] < 1:
        raise ValueError("X and y must have the same, nonzero number of rows")
    q = X.shape[1]
    binary = is_binary(y)
    kind = spec.kind
    if kind == "MeanOnly" or q == 0:
        return _mean_model(y, q, binary)
    if kind in ENSEMBLE_KINDS:
        return fit_stacked(spec, X, y, seed)
    if y.min() == y.max():
        return _mean_model(y, q, binary, note="constant outcome; intercept-only fit")
    if kind == "Linear":
        b0, coef, diag = fit_linear(X, y)
        return FittedModel(kind, q, binary, intercept=b0, coef=coef, diagnostics=diag)
    if not binary:
        raise ValueError(f"{kind} requires a binary outcome")
    if kind == "Logistic":
        b0, coef, diag = fit_logistic(
            X,
            y,
            tol=spec.param("tol"),
            max_iter=spec.param("max_iter"),
            ridge=spec.param("ridge"),
            separation_norm=spec.param("separation_norm"),
        )
    elif kind == "LassoLogistic":
        rng = np.random.Generator(np.random.Philox(_as_seedseq(seed)))
        b0, coef, diag = fit_lasso(
            X,
            y,
            rng,
            n_lambda=spec.param("n_lambda"),
            lambda_min_ratio=spec.param("lambda_min_ratio"),
            cv_folds=spec.param("cv_folds"),
            lam=spec.param("lambda"),
        )
    elif kind == "BoostedStumps":
        if spec.param("max_depth") != 1:
            raise ValueError("BoostedStumps supports max_depth = 1 only")
        b0, stumps, diag = fit_stumps(
            X,
            y,
            ntree=spec.param("ntree"),
            shrinkage=spec.param("shrinkage"),
            min_node_size=spec.param("min_node_size"),
            reg_lambda=spec.param("reg_lambda"),
        )
        return FittedModel(kind, q, binary, intercept=b0, stumps=stumps, diagnostics=diag)
    else:  # pragma: no cover - canonical_kind rejects everything else
        raise ValueError(kind)
    return FittedModel(kind, q, binary, intercept=b0, coef=coef, diagnostics=diag)


def predict(model: FittedModel, X) -> np.ndarray:
    """Predicted conditional means; probabilities are clamped to ``[EPS, 1 - EPS]``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if model.n_features == 1 else X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"model trained on {model.n_features} columns, got {X.shape[1]}")
    n = X.shape[0]
    kind = model.kind
    if kind == "MeanOnly":
        out = np.full(n, model.intercept)
    elif kind == "Linear":
        out = model.intercept + X @ model.coef
    elif kind in ("Logistic", "LassoLogistic"):
        out = expit(model.intercept + X @ model.coef)
    elif kind == "BoostedStumps":
        out = expit(stump_scores(X, model.intercept, model.stumps))
    elif kind in ENSEMBLE_KINDS:
        Z = np.column_stack([predict(m, X) for m in model.members])
        out = Z @ model.weights
    else:  # pragma: no cover
        raise ValueError(kind)
    return clamp(out) if model.binary else out


# ---------------------------------------------------------------------------
# ensembles

def cv_loss(Z, y, binary) -> np.ndarray | float:
    """Mean negative log-likelihood (binary) or squared error of prediction column(s)."""
    Z = np.asarray(Z, dtype=float)
    yy = y if Z.ndim == 1 else y[:, None]
    if binary:
        Zc = clamp(Z)
        return -np.mean(yy * np.log(Zc) + (1 - yy) * np.log(1 - Zc), axis=0)
    return np.mean((yy - Z) ** 2, axis=0)


def _simplex_weights(Z, y, binary, max_iter, tol):
    """Exponentiated-gradient minimization of ``cv_loss(Z @ w)`` over the simplex."""
    M = Z.shape[1]
    w = np.full(M, 1.0 / M)

    def loss(v):
        return float(cv_loss(Z @ v, y, binary))

    def grad(v):
        f = Z @ v
        if binary:
            f = clamp(f)
            r = -(y / f - (1 - y) / (1 - f))
        else:
            r = -2 * (y - f)
        return Z.T @ r / len(y)

    cur = loss(w)
    eta = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(w)
        for _ in range(40):
            logits = np.log(np.maximum(w, 1e-300)) - eta * (g - g.min())
            cand = np.exp(logits - logits.max())
            cand /= cand.sum()
            new = loss(cand)
            if new <= cur:
                break
            eta *= 0.5
        else:
            converged = True  # no descent direction at any step size
            break
        change = float(np.max(np.abs(cand - w)))
        w, cur = cand, new
        eta = min(eta * 2.0, 1e6)
        if change < tol:
            converged = True
            break
    return w, cur, it, converged


def fit_stacked(spec: LearnerSpec, X, y, seed=None) -> FittedModel:
    """Fit a convex-combination (or discrete-selection) ensemble.

    Held-out predictions of every member are produced by inner V-fold
    cross-validation; weights minimize their loss over the probability
    simplex (or select the single best member for ``DiscreteSelector``).
    Members are then refit on all data.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(y)
    binary = is_binary(y)
    V = spec.inner_cv_folds or (5 if n > 1000 else 10)
    if n < V:
        raise ValueError(f"need at least {V} rows for {V}-fold inner cross-validation")
    ss = _as_seedseq(seed)
    split_ss, *member_ss = ss.spawn(1 + len(spec.members))
    rng = np.random.Generator(np.random.Philox(split_ss))
    fold = np.empty(n, dtype=np.int64)
    fold[rng.permutation(n)] = np.arange(n) % V
    M = len(spec.members)
    Z = np.empty((n, M))
    for v in range(V):
        tr, te = fold != v, fold == v
        for m, member in enumerate(spec.members):
            fm = fit(member, X[tr], y[tr], child_seed(member_ss[m], v))
            Z[te, m] = predict(fm, X[te])
    member_losses = np.atleast_1d(cv_loss(Z, y, binary))
    best = int(np.argmin(member_losses))
    diag = {"member_cv_loss": member_losses.tolist(), "inner_cv_folds": V}
    if spec.kind == "DiscreteSelector":
        weights = np.zeros(M)
        weights[best] = 1.0
        diag.update({"converged": True, "selected": best, "cv_loss": float(member_losses[best])})
    else:
        weights, loss, n_iter, converged = _simplex_weights(
            Z, y, binary, spec.param("max_iter"), spec.param("tol")
        )
        if member_losses[best] < loss:
            weights = np.zeros(M)
            weights[best] = 1.0
            loss = float(member_losses[best])
        diag.update({"converged": converged, "iterations": n_iter, "cv_loss": loss})
    members = tuple(
        fit(member, X, y, child_seed(member_ss[m], V)) for m, member in enumerate(spec.members)
    )
    return FittedModel(
        kind=spec.kind,
        n_features=X.shape[1],
        binary=binary,
        members=members,
        weights=weights,
        diagnostics=diag,
    )
