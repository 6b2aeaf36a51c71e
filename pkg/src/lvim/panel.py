"""Longitudinal panel data, variable sets, and subject-level fold assignment."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataValidationError

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})


@dataclass(frozen=True)
class LongitudinalDataset:
    """Balanced panel of ``n`` subjects observed at ``T`` timepoints.

    Parameters
    ----------
    features : ndarray, shape (T, n, p)
        Feature matrix for every timepoint.
    outcomes : ndarray, shape (T, n)
        Outcome vector for every timepoint.
    subject_ids : sequence of str, optional
        Identifiers, one per subject. Defaults to ``"0".."n-1"``.
    time_labels : array_like, optional
        Strictly increasing real time labels. Defaults to ``1..T``.
    feature_names : sequence of str, optional
        Column names. Defaults to ``x1..xp``.
    """

    features: np.ndarray
    outcomes: np.ndarray
    subject_ids: tuple = ()
    time_labels: np.ndarray = None
    feature_names: tuple = ()
    base_names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        Y = np.asarray(self.outcomes, dtype=float)
        if X.ndim != 3:
            raise DataValidationError("features must have shape (T, n, p)")
        T, n, p = X.shape
        if Y.shape != (T, n):
            raise DataValidationError(
                f"outcomes shape {Y.shape} does not match features (T={T}, n={n})"
            )
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Y)):
            raise DataValidationError("features and outcomes must be finite")
        ids = tuple(str(s) for s in self.subject_ids) or tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise DataValidationError(f"expected {n} subject ids, got {len(ids)}")
        times = (
            np.arange(1, T + 1, dtype=float)
            if self.time_labels is None
            else np.asarray(self.time_labels, dtype=float)
        )
        if times.shape != (T,):
            raise DataValidationError(f"expected {T} time labels, got {times.shape}")
        if T > 1 and np.any(np.diff(times) <= 0):
            raise DataValidationError("time labels must be strictly increasing")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise DataValidationError(f"expected {p} feature names, got {len(names)}")
        X.setflags(write=False)
        Y.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "outcomes", Y)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "time_labels", times)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "base_names", tuple(self.base_names))

    @property
    def T(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def p(self) -> int:
        return self.features.shape[2]

    def is_binary(self) -> bool:
        return bool(np.all((self.outcomes == 0) | (self.outcomes == 1)))

    def require_binary(self) -> None:
        if not self.is_binary():
            bad = np.unique(self.outcomes[(self.outcomes != 0) & (self.outcomes != 1)])
            raise DataValidationError(
                f"binary outcome required; found values {bad[:5].tolist()}"
            )

    def column_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataValidationError(f"unknown feature column {name!r}") from None


@dataclass(frozen=True)
class VariableSet:
    """Indices of the variables of interest ``s`` and the base set ``w``."""

    s: tuple
    w: tuple
    p: int

    def __post_init__(self):
        s = tuple(sorted(int(i) for i in self.s))
        w = tuple(sorted(int(i) for i in self.w))
        if not s:
            raise ValueError("variable set s must be nonempty")
        if len(set(s)) != len(s) or len(set(w)) != len(w):
            raise ValueError("duplicate indices in variable set")
        for i in s + w:
            if not 0 <= i < self.p:
                raise ValueError(f"index {i} outside [0, {self.p})")
        if set(s) & set(w):
            raise ValueError(f"s and w must be disjoint; overlap {sorted(set(s) & set(w))}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "w", w)

    @property
    def full(self) -> tuple:
        return tuple(range(self.p))

    @property
    def residual(self) -> tuple:
        return tuple(j for j in range(self.p) if j not in self.s)

    @property
    def marginal(self) -> tuple:
        return tuple(sorted(self.s + self.w))

    @property
    def base(self) -> tuple:
        return self.w


@dataclass(frozen=True)
class TimeWindow:
    """Contiguous, inclusive range of timepoint indices ``[t0, t1]``."""

    t0: int
    t1: int

    def validate(self, T: int) -> None:
        if not 0 <= self.t0 <= self.t1 < T:
            raise ValueError(f"window [{self.t0}, {self.t1}] invalid for T={T}")

    @property
    def indices(self) -> range:
        return range(self.t0, self.t1 + 1)

    def __len__(self) -> int:
        return self.t1 - self.t0 + 1

    @classmethod
    def full(cls, T: int) -> "TimeWindow":
        return cls(0, T - 1)


@dataclass(frozen=True)
class FoldAssignment:
    """Subject-level assignment to one of two halves and one of ``K`` folds.

    Every half contains subjects from every fold whenever ``K <= n // 2``,
    so a pair of predictiveness values can be cross-fit on opposite halves.
    """

    fold_of: np.ndarray
    half_of: np.ndarray
    K: int
    seed: int | None = None

    def __post_init__(self):
        fold = np.asarray(self.fold_of, dtype=np.int64)
        half = np.asarray(self.half_of, dtype=np.int64)
        if fold.shape != half.shape or fold.ndim != 1:
            raise ValueError("fold_of and half_of must be 1-d of equal length")
        if fold.size and (fold.min() < 0 or fold.max() >= self.K):
            raise ValueError("fold labels must lie in [0, K)")
        if half.size and not np.all((half == 0) | (half == 1)):
            raise ValueError("half labels must be 0 or 1")
        fold.setflags(write=False)
        half.setflags(write=False)
        object.__setattr__(self, "fold_of", fold)
        object.__setattr__(self, "half_of", half)

    @property
    def n(self) -> int:
        return self.fold_of.size

    def folds_in_half(self, half: int) -> list[int]:
        return sorted(set(self.fold_of[self.half_of == half].tolist()))


def make_folds(n: int, K: int, seed: int) -> FoldAssignment:
    """Randomly assign ``n`` subjects to ``K`` folds nested within two halves.

    Folds are dealt round-robin over a seeded permutation, then each fold is
    split alternately between halves with a running parity so that fold
    sizes and half sizes each differ by at most one.
    """
    if not isinstance(n, (int, np.integer)) or not isinstance(K, (int, np.integer)):
        raise ValueError("n and K must be integers")
    if K < 2 or K > n:
        raise ValueError(f"need 2 <= K <= n, got K={K}, n={n}")
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % K
    half_of = np.empty(n, dtype=np.int64)
    parity = 0
    for k in range(K):
        members = order[np.arange(k, n, K)]
        half_of[members] = (parity + np.arange(members.size)) % 2
        parity = (parity + members.size) % 2
    return FoldAssignment(fold_of=fold_of, half_of=half_of, K=int(K), seed=seed)


# ---------------------------------------------------------------------------
# CSV ingestion

@dataclass
class Schema:
    """Column mapping for long-format CSV input.

    ``features`` defaults to every column not otherwise mapped. Columns in
    ``missing_indicators`` may contain missing cells; each is zero-filled and
    paired with an added ``<name>_missing`` 0/1 column.
    """

    subject: str = "subject_id"
    time: str = "time"
    outcome: str = "y"
    features: list | None = None
    missing_indicators: list = field(default_factory=list)
    base: list = field(default_factory=list)

    @classmethod
    def from_json(cls, source) -> "Schema":
        """Accept a mapping, JSON text, or a path to a JSON sidecar file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text(encoding="utf-8")
        raw = json.loads(source) if isinstance(source, str) else dict(source)
        known = {"subject", "time", "outcome", "features", "missing_indicators", "base"}
        unknown = set(raw) - known
        if unknown:
            raise DataValidationError(f"unknown schema keys {sorted(unknown)}")
        return cls(**raw)


def _parse_cell(text: str, column: str, row: int, allow_missing: bool) -> float:
    if text.strip().lower() in MISSING_TOKENS:
        if allow_missing:
            return math.nan
        raise DataValidationError(f"missing value in column {column!r} at data row {row}")
    try:
        value = float(text)
    except ValueError:
        raise DataValidationError(
            f"non-numeric value {text!r} in column {column!r} at data row {row}"
        ) from None
    if not math.isfinite(value):
        raise DataValidationError(f"non-finite value in column {column!r} at data row {row}")
    return value


def load_dataset(source, schema: Schema | None = None, binary: bool = False) -> LongitudinalDataset:
    """Read a long-format CSV (one row per subject and time) into a panel.

    Parameters
    ----------
    source : path, str, bytes, or text stream
        CSV with a header row. A ``str`` is treated as a path only if it does
        not contain a newline.
    schema : Schema, optional
        Column mapping; defaults to ``subject_id,time,y,<features...>``.
    binary : bool
        Require every outcome to be exactly 0 or 1.
    """
    schema = schema or Schema()
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataValidationError("empty input") from None
    for col in (schema.subject, schema.time, schema.outcome):
        if col not in header:
            raise DataValidationError(f"required column {col!r} not in header")
    reserved = {schema.subject, schema.time, schema.outcome}
    feature_cols = list(schema.features) if schema.features is not None else [
        h for h in header if h not in reserved
    ]
    for col in feature_cols + list(schema.missing_indicators) + list(schema.base):
        if col not in header:
            raise DataValidationError(f"unknown column {col!r}")
    for col in schema.missing_indicators:
        if col not in feature_cols:
            raise DataValidationError(f"missing-indicator column {col!r} is not a feature")
    pos = {h: i for i, h in enumerate(header)}
    missing_ok = set(schema.missing_indicators)

    cells: dict[tuple[str, float], tuple[float, list[float]]] = {}
    subjects: list[str] = []
    seen_subjects: set[str] = set()
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataValidationError(
                f"data row {rownum} has {len(row)} fields, header has {len(header)}"
            )
        sid = row[pos[schema.subject]].strip()
        t = _parse_cell(row[pos[schema.time]], schema.time, rownum, False)
        y = _parse_cell(row[pos[schema.outcome]], schema.outcome, rownum, False)
        x = [_parse_cell(row[pos[c]], c, rownum, c in missing_ok) for c in feature_cols]
        if (sid, t) in cells:
            raise DataValidationError(f"duplicate row for subject {sid!r} at time {t!r}")
        cells[(sid, t)] = (y, x)
        if sid not in seen_subjects:
            seen_subjects.add(sid)
            subjects.append(sid)
    if not cells:
        raise DataValidationError("no data rows")

    times = sorted({t for _, t in cells})
    for sid in subjects:
        for t in times:
            if (sid, t) not in cells:
                raise DataValidationError(
                    f"unbalanced panel: subject {sid!r} has no row at time {t!r}"
                )
    T, n, p = len(times), len(subjects), len(feature_cols)
    X = np.empty((T, n, p))
    Y = np.empty((T, n))
    for ti, t in enumerate(times):
        for i, sid in enumerate(subjects):
            y, x = cells[(sid, t)]
            Y[ti, i] = y
            X[ti, i] = x

    names = list(feature_cols)
    extra = []
    for col in schema.missing_indicators:
        j = feature_cols.index(col)
        miss = np.isnan(X[:, :, j])
        X[:, :, j] = np.where(miss, 0.0, X[:, :, j])
        extra.append(miss.astype(float))
        names.append(f"{col}_missing")
    if extra:
        X = np.concatenate([X] + [e[:, :, None] for e in extra], axis=2)

    data = LongitudinalDataset(
        features=X,
        outcomes=Y,
        subject_ids=subjects,
        time_labels=np.asarray(times),
        feature_names=names,
        base_names=tuple(schema.base),
    )
    if binary:
        data.require_binary()
    return data


def to_csv(data: LongitudinalDataset) -> str:
    """Serialize a panel to long-format CSV; floats use shortest round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subject_id", "time", "y", *data.feature_names])
    for ti in range(data.T):
        t = repr(float(data.time_labels[ti]))
        for i, sid in enumerate(data.subject_ids):
            writer.writerow(
                [sid, t, repr(float(data.outcomes[ti, i]))]
                + [repr(float(v)) for v in data.features[ti, i]]
            )
    return buf.getvalue()


def columns_from_names(data: LongitudinalDataset, names: Iterable[str]) -> tuple:
    return tuple(data.column_index(nm) for nm in names)


def subset_subjects(data: LongitudinalDataset, idx: Sequence[int]) -> LongitudinalDataset:
    idx = np.asarray(idx)
    return LongitudinalDataset(
        features=data.features[:, idx, :],
        outcomes=data.outcomes[:, idx],
        subject_ids=[data.subject_ids[i] for i in idx],
        time_labels=data.time_labels,
        feature_names=data.feature_names,
        base_names=data.base_names,
    )
