"""Synthetic longitudinal data, oracle VIM truths, and Monte Carlo studies.

Random streams
--------------
All randomness comes from the counter-based Philox generator. A stream is
addressed by a root seed plus a tuple of integer keys (for a study:
``(replicate, purpose)``), through :class:`numpy.random.SeedSequence`
spawn keys, so every replicate owns an independent stream regardless of
which worker runs it. Normal variates are drawn by inverting the normal
CDF at 53-bit uniforms, which keeps draws identical across platforms.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import learners
from .errors import LvimError
from .inference import VIM_KINDS, canonical_vim_kind, estimate_trajectory, infer_summary, wald
from .panel import LongitudinalDataset, VariableSet, make_folds
from .predictiveness import PredictivenessMeasure
from .summaries import SummarySpec, summarize

# ---------------------------------------------------------------------------
# random streams


def stream(root_seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def seed_for(root_seed: int, *keys: int) -> int:
    """A 63-bit integer seed derived from ``root_seed`` and ``keys``."""
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    bits = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
    return ndtri((bits + 0.5) / float(1 << 53))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    bits = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
    return (bits + 0.5) / float(1 << 53)


# ---------------------------------------------------------------------------
# data-generating process


def beta_at(t: float) -> np.ndarray:
    """Coefficient vector of the ten-feature probit model at time ``t``."""
    b = np.zeros(10)
    b[0] = 2.0
    b[1] = 2.0 + t / 4.0
    b[2] = -1.0 / (1.0 + math.exp(-t)) + 2.0
    b[3:7] = 0.05
    return b


def default_beta(T: int, t_start: int = 0) -> np.ndarray:
    """``T x 10`` coefficient matrix with rows ``beta_at(t_start), ..., beta_at(t_start + T - 1)``.

    ``t_start = 0`` reproduces the reference truth tables.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    return np.vstack([beta_at(t_start + i) for i in range(T)])


@dataclass(frozen=True)
class DgpConfig:
    """Probit outcome model with cross-loaded, optionally autocorrelated normal features.

    ``loaded`` features equal ``cross_loading`` times the sum of the
    ``sources`` plus independent noise; remaining features are independent
    standard normal at each timepoint. With ``rho > 0`` the loaded and
    source features follow AR(1) recursions from the second timepoint on.
    """

    beta: np.ndarray
    rho: float = 0.0
    cross_loading: float = 0.05
    loaded: tuple = (0, 1, 2)
    sources: tuple = (3, 4, 5, 6)

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.ndim != 2:
            raise ValueError("beta must be a T x p matrix")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        for j in tuple(self.loaded) + tuple(self.sources):
            if not 0 <= j < b.shape[1]:
                raise ValueError(f"feature index {j} out of range")
        if set(self.loaded) & set(self.sources):
            raise ValueError("loaded and source features must be disjoint")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "loaded", tuple(self.loaded))
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def T(self) -> int:
        return self.beta.shape[0]

    @property
    def p(self) -> int:
        return self.beta.shape[1]

    @classmethod
    def standard(cls, T: int = 4, rho: float = 0.0) -> "DgpConfig":
        return cls(beta=default_beta(T), rho=rho)

    def loading_matrix(self) -> np.ndarray:
        C = np.eye(self.p)
        for j in self.loaded:
            C[j, list(self.sources)] = self.cross_loading
        return C

    def covariances(self) -> list[np.ndarray]:
        """Marginal covariance of the features at each timepoint."""
        C = self.loading_matrix()
        D = np.zeros((self.p, self.p))
        ar = list(self.loaded) + list(self.sources)
        D[ar, ar] = self.rho
        S = C @ C.T
        out = [S]
        for _ in range(1, self.T):
            S = C @ (D @ S @ D.T + np.eye(self.p)) @ C.T
            out.append(S)
        return out

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "p": self.p,
            "beta": self.beta.tolist(),
            "rho": self.rho,
            "cross_loading": self.cross_loading,
            "loaded": list(self.loaded),
            "sources": list(self.sources),
        }


def _draw_features(config: DgpConfig, n: int, rng: np.random.Generator) -> np.ndarray:
    T, p = config.T, config.p
    C = config.loading_matrix()
    ar = np.zeros(p)
    ar[list(config.loaded) + list(config.sources)] = config.rho
    X = np.empty((T, n, p))
    prev = np.zeros((n, p))
    for t in range(T):
        eps = standard_normal(rng, (n, p))
        X[t] = (prev * ar + eps) @ C.T
        prev = X[t]
    return X


def generate(config: DgpConfig, n: int, seed: int) -> LongitudinalDataset:
    """Draw ``n`` subjects; ``Y_t ~ Bernoulli(Phi(beta_t . x_t))``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream(seed, 0)
    X = _draw_features(config, n, rng)
    u = uniform(rng, (config.T, n))
    eta = np.einsum("tnp,tp->tn", X, config.beta)
    Y = (u < ndtr(eta)).astype(float)
    return LongitudinalDataset(features=X, outcomes=Y)


def true_conditional_mean(config: DgpConfig, t: int, cols, X_t: np.ndarray, cov=None) -> np.ndarray:
    """``E[Y_t | X_{t,cols}]`` in closed form.

    With ``eta = beta . x`` jointly normal with the observed features,
    ``E[Phi(eta) | x_r] = Phi(m(x_r) / sqrt(1 + v))`` where ``m`` and
    ``v`` are the conditional mean and variance of ``eta``.
    """
    S = config.covariances()[t] if cov is None else cov
    b = config.beta[t]
    cols = list(cols)
    total = float(b @ S @ b)
    if not cols:
        return np.full(X_t.shape[0], ndtr(0.0))
    Srr = S[np.ix_(cols, cols)]
    c = S[cols] @ b
    coef = np.linalg.solve(Srr, c)
    v = max(total - float(c @ coef), 0.0)
    return ndtr((X_t[:, cols] @ coef) / math.sqrt(1.0 + v))


def conditional_mean_mc(config: DgpConfig, t: int, cols, X_t: np.ndarray, draws: int, seed: int) -> np.ndarray:
    """Nested Monte Carlo estimate of ``E[Y_t | X_{t,cols}]``.

    Excluded features are resampled from their Gaussian conditional
    distribution given the observed ones; independent of the closed form.
    """
    S = config.covariances()[t]
    b = config.beta[t]
    cols = list(cols)
    rest = [j for j in range(config.p) if j not in cols]
    rng = stream(seed, 1)
    if not rest:
        return ndtr(X_t @ b)
    if cols:
        Srr = S[np.ix_(cols, cols)]
        A = np.linalg.solve(Srr, S[np.ix_(cols, rest)]).T  # E[x_rest | x_r] = A x_r
        Sc = S[np.ix_(rest, rest)] - A @ S[np.ix_(cols, rest)]
        mean_rest = X_t[:, cols] @ A.T
    else:
        Sc = S[np.ix_(rest, rest)]
        mean_rest = np.zeros((X_t.shape[0], len(rest)))
    L = np.linalg.cholesky(Sc + 1e-14 * np.eye(len(rest)))
    out = np.zeros(X_t.shape[0])
    obs = X_t[:, cols] @ b[cols] if cols else 0.0
    for _ in range(draws):
        z = standard_normal(rng, (X_t.shape[0], len(rest))) @ L.T
        out += ndtr(obs + (mean_rest + z) @ b[rest])
    return out / draws


# ---------------------------------------------------------------------------
# oracle truths


@dataclass(frozen=True)
class OracleTruth:
    """True VIM trajectory for one variable set and VIM kind."""

    kind: str
    variables: tuple
    values: np.ndarray
    larger: np.ndarray
    smaller: np.ndarray
    time_labels: np.ndarray

    def summary(self, spec) -> float:
        return summarize(SummarySpec.parse(spec), self.values, self.time_labels, gradient=False).value

    @property
    def mean(self) -> float:
        return self.summary("mean")

    @property
    def trend_intercept(self) -> float:
        return self.summary("intercept")

    @property
    def trend_slope(self) -> float:
        return self.summary("slope")


def oracle_truths(
    config: DgpConfig,
    N: int,
    seed: int,
    measure: PredictivenessMeasure,
    varsets: list,
    kinds=VIM_KINDS,
    time_labels=None,
) -> dict:
    """True trajectories for several variable sets from one large draw.

    Returns a dict keyed by ``(kind, varset.s)``. Predictiveness of a set
    is the measure evaluated at the true conditional mean restricted to the
    set, against outcomes drawn from the full model.
    """
    data = generate(config, N, seed)
    times = np.arange(1.0, config.T + 1) if time_labels is None else np.asarray(time_labels, dtype=float)
    covs = config.covariances()
    values: dict = {}

    def pred(t, cols):
        key = (t, cols)
        if key not in values:
            f = true_conditional_mean(config, t, cols, data.features[t], covs[t])
            values[key] = measure(f, data.outcomes[t]).value
        return values[key]

    out = {}
    for kind in kinds:
        kind = canonical_vim_kind(kind)
        for vs in varsets:
            sets = (vs.marginal, vs.base) if kind == "AddIn" else (vs.full, vs.residual)
            big = np.array([pred(t, sets[0]) for t in range(config.T)])
            small = np.array([pred(t, sets[1]) for t in range(config.T)])
            out[(kind, vs.s)] = OracleTruth(kind, vs.s, big - small, big, small, times)
    return out


def oracle_truth(config, N, seed, measure, varset, vim_kind="AddIn", time_labels=None) -> OracleTruth:
    if N < 100_000:
        raise ValueError("oracle sample size must be at least 1e5")
    return oracle_truths(config, N, seed, measure, [varset], (vim_kind,), time_labels)[
        (canonical_vim_kind(vim_kind), varset.s)
    ]


def simple_r2_example(N: int = 1_000_000, seed: int = 0) -> dict:
    """Predictiveness values of a three-feature Gaussian linear model under R-squared.

    ``(W, U1, U2) ~ N(0, I)`` and ``Y | W, U ~ N(0.5 (W + U1) + 2 U2, 1)``
    with ``U2`` the variable of interest and ``W`` the base set.
    """
    rng = stream(seed, 0)
    Z = standard_normal(rng, (N, 4))
    w, u1, u2 = Z[:, 0], Z[:, 1], Z[:, 2]
    y = 0.5 * (w + u1) + 2 * u2 + Z[:, 3]
    r2 = PredictivenessMeasure("RSquared")
    vals = {
        "total": r2(0.5 * (w + u1) + 2 * u2, y).value,
        "residual": r2(0.5 * (w + u1), y).value,
        "marginal": r2(0.5 * w + 2 * u2, y).value,
        "irreducible": r2(0.5 * w, y).value,
    }
    vals["leave_out"] = vals["total"] - vals["residual"]
    vals["add_in"] = vals["marginal"] - vals["irreducible"]
    return vals


# ---------------------------------------------------------------------------
# Monte Carlo studies


@dataclass(frozen=True)
class Scenario:
    """One cell of a simulation study: a DGP, sample size, learner, and targets.

    ``variables`` and ``base`` are 0-based feature indices; each variable
    is assessed on its own against the base set.
    """

    config: DgpConfig
    n: int
    R: int
    learner: learners.LearnerSpec
    measure: PredictivenessMeasure = PredictivenessMeasure("AUC")
    variables: tuple = (0, 1, 2, 7)
    base: tuple = (3, 4, 5, 6)
    vim_kinds: tuple = ("AddIn", "LeaveOut")
    summaries: tuple = ("mean", "slope")
    K: int = 5
    alpha: float = 0.05
    estimator: str = ""
    oracle_N: int = 500_000
    oracle_seed: int = 20240101
    timepoints: bool = False

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if self.n < 2 * self.K:
            raise ValueError("n must be at least 2K so each half holds every fold")
        object.__setattr__(self, "vim_kinds", tuple(canonical_vim_kind(k) for k in self.vim_kinds))
        object.__setattr__(self, "summaries", tuple(SummarySpec.parse(s) for s in self.summaries))
        object.__setattr__(self, "variables", tuple(int(v) for v in self.variables))
        object.__setattr__(self, "base", tuple(int(v) for v in self.base))

    @property
    def label(self) -> str:
        return self.estimator or self.learner.kind

    def varsets(self) -> list[VariableSet]:
        return [VariableSet((v,), self.base, self.config.p) for v in self.variables]

    def targets(self) -> list[tuple[str, str]]:
        """Names of the reported quantities: summaries, then timepoints if requested."""
        out = [(s.name, "summary") for s in self.summaries]
        if self.timepoints:
            out += [(f"t{i + 1}", "timepoint") for i in range(self.config.T)]
        return out


@dataclass
class ReplicateResult:
    replicate: int
    records: dict = field(default_factory=dict)  # (kind, var, target) -> (est, lo, hi, p)
    failures: dict = field(default_factory=dict)  # (kind, var) -> message


def run_replicate(scenario: Scenario, root_seed: int, r: int) -> ReplicateResult:
    """Generate one dataset and estimate every requested VIM on it."""
    data = generate(scenario.config, scenario.n, seed_for(root_seed, r, 0))
    folds = make_folds(scenario.n, scenario.K, seed_for(root_seed, r, 1))
    est_seed = np.random.SeedSequence(int(root_seed), spawn_key=(r, 2))
    out = ReplicateResult(r)
    cache: dict = {}
    for kind in scenario.vim_kinds:
        for vs in scenario.varsets():
            var = vs.s[0]
            try:
                traj = estimate_trajectory(
                    data, vs, scenario.learner, scenario.measure, folds, None, est_seed, kind, cache
                )
                rows = {}
                for spec in scenario.summaries:
                    res = infer_summary(traj, spec, scenario.alpha)
                    rows[spec.name] = (res.estimate, res.ci_lower, res.ci_upper, res.p_value)
                if scenario.timepoints:
                    for j in range(traj.estimates.size):
                        res = wald(float(traj.estimates[j]), traj.eif_matrix[:, j], scenario.alpha)
                        rows[f"t{j + 1}"] = (res.estimate, res.ci_lower, res.ci_upper, res.p_value)
            except (LvimError, ValueError, np.linalg.LinAlgError) as exc:
                out.failures[(kind, var)] = f"{type(exc).__name__}: {exc}"
                continue
            for name, vals in rows.items():
                out.records[(kind, var, name)] = vals
    return out


def _run_replicate_args(args):
    return run_replicate(*args)


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("LVIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"LVIM_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ReportRow:
    vim_kind: str
    variable: int
    summary: str
    estimator: str
    n: int
    mean_est: float
    true_value: float
    empirical_se: float
    coverage: float
    rejection_prop: float
    ci_width: float
    replicates: int
    failures: int
    empirical_se_defined: bool = True

    @property
    def key(self) -> tuple:
        return (self.vim_kind, self.variable, self.summary, self.estimator, self.n)


@dataclass(frozen=True)
class MonteCarloReport:
    rows: tuple
    root_seed: int
    scenario: dict
    failure_messages: tuple = ()

    def row(self, vim_kind: str, variable: int, summary: str) -> ReportRow:
        kind = canonical_vim_kind(vim_kind)
        for r in self.rows:
            if r.vim_kind == kind and r.variable == variable and r.summary == summary:
                return r
        raise KeyError((vim_kind, variable, summary))


def _truth_targets(scenario: Scenario) -> dict:
    truths = oracle_truths(
        scenario.config,
        scenario.oracle_N,
        scenario.oracle_seed,
        scenario.measure,
        scenario.varsets(),
        scenario.vim_kinds,
    )
    out = {}
    for (kind, s), truth in truths.items():
        for spec in scenario.summaries:
            out[(kind, s[0], spec.name)] = truth.summary(spec)
        for j in range(truth.values.size):
            out[(kind, s[0], f"t{j + 1}")] = float(truth.values[j])
    return out


def scenario_description(scenario: Scenario) -> dict:
    return {
        "config": scenario.config.as_dict(),
        "n": scenario.n,
        "R": scenario.R,
        "learner": scenario.learner.describe(),
        "measure": scenario.measure.kind,
        "variables": list(scenario.variables),
        "base": list(scenario.base),
        "vim_kinds": list(scenario.vim_kinds),
        "summaries": [s.name for s in scenario.summaries],
        "K": scenario.K,
        "alpha": scenario.alpha,
        "estimator": scenario.label,
        "oracle_N": scenario.oracle_N,
        "oracle_seed": scenario.oracle_seed,
        "timepoints": scenario.timepoints,
    }


def run_study(scenario: Scenario, root_seed: int, workers: int | None = None, truths: dict | None = None) -> MonteCarloReport:
    """Replicate ``scenario`` ``R`` times and aggregate operating characteristics.

    Replicate ``r`` draws every random quantity from streams keyed by
    ``(root_seed, r, ...)``, so the report does not depend on the number
    of workers or on completion order.
    """
    nw = min(worker_count(workers), scenario.R)
    args = [(scenario, root_seed, r) for r in range(scenario.R)]
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            results = list(pool.map(_run_replicate_args, args, chunksize=max(1, scenario.R // (4 * nw))))
    else:
        results = [run_replicate(*a) for a in args]
    truths = _truth_targets(scenario) if truths is None else truths
    rows = []
    failure_msgs = []
    for res in results:
        for (kind, var), msg in sorted(res.failures.items()):
            failure_msgs.append({"replicate": res.replicate, "vim_kind": kind, "variable": var, "error": msg})
    for kind in scenario.vim_kinds:
        for var in scenario.variables:
            n_fail = sum((kind, var) in res.failures for res in results)
            for name, _ in scenario.targets():
                recs = np.array([res.records[(kind, var, name)] for res in results if (kind, var, name) in res.records])
                truth = truths[(kind, var, name)]
                if recs.size == 0:
                    rows.append(ReportRow(kind, var, name, scenario.label, scenario.n, math.nan, truth,
                                          math.nan, math.nan, math.nan, math.nan, 0, n_fail, False))
                    continue
                est, lo, hi, p = recs.T
                defined = est.size > 1
                rows.append(
                    ReportRow(
                        vim_kind=kind,
                        variable=var,
                        summary=name,
                        estimator=scenario.label,
                        n=scenario.n,
                        mean_est=float(est.mean()),
                        true_value=float(truth),
                        empirical_se=float(est.std(ddof=1)) if defined else 0.0,
                        coverage=float(np.mean((lo <= truth) & (truth <= hi))),
                        rejection_prop=float(np.mean(p < scenario.alpha)),
                        ci_width=float(np.mean(hi - lo)),
                        replicates=int(est.size),
                        failures=n_fail,
                        empirical_se_defined=defined,
                    )
                )
    rows.sort(key=lambda r: (r.vim_kind, r.variable, r.summary, r.estimator, r.n))
    return MonteCarloReport(tuple(rows), int(root_seed), scenario_description(scenario), tuple(failure_msgs))
