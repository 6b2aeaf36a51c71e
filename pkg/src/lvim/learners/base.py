"""Learner specifications and fitted-model containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

KINDS = (
    "MeanOnly",
    "Logistic",
    "Linear",
    "LassoLogistic",
    "BoostedStumps",
    "StackedEnsemble",
    "DiscreteSelector",
)
ENSEMBLE_KINDS = ("StackedEnsemble", "DiscreteSelector")

# Probability clamp keeping log-likelihoods finite.
EPS = 1e-6

_ALIASES = {k.lower(): k for k in KINDS}
_ALIASES.update(
    {
        "mean": "MeanOnly",
        "glm": "Logistic",
        "logistic_regression": "Logistic",
        "ols": "Linear",
        "lasso": "LassoLogistic",
        "glmnet": "LassoLogistic",
        "xgb": "BoostedStumps",
        "stumps": "BoostedStumps",
        "sl": "StackedEnsemble",
        "superlearner": "StackedEnsemble",
        "stacked": "StackedEnsemble",
        "discrete": "DiscreteSelector",
    }
)

DEFAULT_PARAMS = {
    "MeanOnly": {},
    "Logistic": {"tol": 1e-8, "max_iter": 100, "ridge": 1e-6, "separation_norm": 1e3},
    "Linear": {},
    "LassoLogistic": {"n_lambda": 100, "lambda_min_ratio": 1e-3, "cv_folds": 10, "lambda": None},
    "BoostedStumps": {"ntree": 500, "shrinkage": 0.1, "max_depth": 1, "min_node_size": 10, "reg_lambda": 1.0},
    "StackedEnsemble": {"max_iter": 1000, "tol": 1e-8},
    "DiscreteSelector": {},
}


def canonical_kind(kind: str) -> str:
    try:
        return _ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown learner kind {kind!r}; expected one of {KINDS}") from None


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative description of a conditional-mean estimator.

    Parameters
    ----------
    kind : str
        One of :data:`KINDS` (aliases such as ``"glm"`` or ``"lasso"`` accepted).
    params : dict
        Kind-specific hyperparameters; unspecified keys take
        :data:`DEFAULT_PARAMS` values.
    members : tuple of LearnerSpec
        Library for ensemble kinds; at least two, none an ensemble.
    inner_cv_folds : int, optional
        Folds used to weight or select ensemble members. Defaults to 5 when
        ``n > 1000`` and 10 otherwise.
    """

    kind: str
    params: dict = field(default_factory=dict)
    members: tuple = ()
    inner_cv_folds: int | None = None

    def __post_init__(self):
        kind = canonical_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        unknown = set(self.params) - set(DEFAULT_PARAMS[kind])
        if unknown:
            raise ValueError(f"unknown hyperparameters for {kind}: {sorted(unknown)}")
        object.__setattr__(self, "members", tuple(self.members))
        if kind in ENSEMBLE_KINDS:
            if len(self.members) < 2:
                raise ValueError(f"{kind} needs at least two members")
            for m in self.members:
                if m.kind in ENSEMBLE_KINDS:
                    raise ValueError("ensemble members cannot themselves be ensembles")
        elif self.members:
            raise ValueError(f"{kind} does not take members")
        if self.inner_cv_folds is not None and self.inner_cv_folds < 2:
            raise ValueError("inner_cv_folds must be at least 2")

    def param(self, key: str) -> Any:
        return self.params.get(key, DEFAULT_PARAMS[self.kind][key])

    def describe(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.params:
            out["params"] = dict(sorted(self.params.items()))
        if self.members:
            out["members"] = [m.describe() for m in self.members]
        if self.inner_cv_folds is not None:
            out["inner_cv_folds"] = self.inner_cv_folds
        return out

    @classmethod
    def from_dict(cls, raw) -> "LearnerSpec":
        if isinstance(raw, str):
            return cls(raw)
        raw = dict(raw)
        unknown = set(raw) - {"kind", "params", "members", "inner_cv_folds"}
        if unknown:
            raise ValueError(f"unknown learner keys {sorted(unknown)}")
        if "kind" not in raw:
            raise ValueError("learner spec needs a 'kind'")
        members = tuple(cls.from_dict(m) for m in raw.get("members", ()))
        return cls(
            kind=raw["kind"],
            params=dict(raw.get("params") or {}),
            members=members,
            inner_cv_folds=raw.get("inner_cv_folds"),
        )


@dataclass(frozen=True)
class FittedModel:
    """Result of :func:`lvim.learners.fit`.

    Only the fields relevant to ``kind`` are populated. ``binary`` records
    whether predictions are probabilities (and therefore clamped).
    """

    kind: str
    n_features: int
    binary: bool
    intercept: float = 0.0
    coef: np.ndarray | None = None
    stumps: tuple | None = None
    members: tuple = ()
    weights: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))


def is_binary(y: np.ndarray) -> bool:
    return bool(np.all((y == 0) | (y == 1)))


def clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, EPS, 1.0 - EPS)
