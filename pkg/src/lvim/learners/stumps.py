"""Gradient-boosted depth-one trees under logistic loss.

Second-order (Newton) boosting: each round fits the single split that
maximizes the regularized gain on the current gradients and Hessians, with
leaf weights ``-G / (H + reg_lambda)`` shrunk by the learning rate.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def fit_stumps(X, y, ntree=500, shrinkage=0.1, min_node_size=10, reg_lambda=1.0):
    n, q = X.shape
    ybar = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    base = float(np.log(ybar / (1 - ybar)))
    F = np.full(n, base)
    order = np.argsort(X, axis=0, kind="stable").T  # (q, n)
    xs = np.take_along_axis(X.T, order, axis=1)
    counts = np.arange(1, n)
    valid = (xs[:, 1:] > xs[:, :-1]) & (counts >= min_node_size) & (n - counts >= min_node_size)
    thresholds = 0.5 * (xs[:, 1:] + xs[:, :-1])
    feats, thrs, lefts, rights = [], [], [], []
    if not valid.any():
        return base, (), {"converged": True, "rounds": 0}
    for _ in range(ntree):
        p = expit(F)
        g = p - y
        h = p * (1 - p)
        G, H = g.sum(), h.sum()
        GL = np.cumsum(g[order], axis=1)[:, :-1]
        HL = np.cumsum(h[order], axis=1)[:, :-1]
        gain = GL**2 / (HL + reg_lambda) + (G - GL) ** 2 / (H - HL + reg_lambda)
        gain = np.where(valid, gain, -np.inf)
        j, k = np.unravel_index(np.argmax(gain), gain.shape)
        if not np.isfinite(gain[j, k]):
            break
        wl = -shrinkage * GL[j, k] / (HL[j, k] + reg_lambda)
        wr = -shrinkage * (G - GL[j, k]) / (H - HL[j, k] + reg_lambda)
        thr = thresholds[j, k]
        F += np.where(X[:, j] <= thr, wl, wr)
        feats.append(int(j))
        thrs.append(float(thr))
        lefts.append(float(wl))
        rights.append(float(wr))
    stumps = (np.array(feats, dtype=np.int64), np.array(thrs), np.array(lefts), np.array(rights))
    return base, stumps, {"converged": True, "rounds": len(feats)}


def stump_scores(X, base, stumps):
    if not stumps:
        return np.full(X.shape[0], base)
    feats, thrs, lefts, rights = stumps
    left = X[:, feats] <= thrs
    return base + np.where(left, lefts, rights).sum(axis=1)
