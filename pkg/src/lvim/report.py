"""CSV, JSON, and plain-text renderings of trajectories and study reports.

Numbers are written with Python's shortest round-trip ``repr`` so that
parsing a rendering recovers the stored floats exactly. Non-finite values
become empty CSV cells or JSON ``null`` with a diagnostic naming the field.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .inference import InferenceResult, VimTrajectory
from .simulation import MonteCarloReport, ReportRow

FORMATS = ("csv", "json", "text")
TRAJECTORY_COLUMNS = ("time", "estimate", "se", "ci_lower", "ci_upper", "p_value")
STUDY_COLUMNS = (
    "vim_kind",
    "variable",
    "summary",
    "estimator",
    "n",
    "mean_est",
    "true_value",
    "empirical_se",
    "coverage",
    "rejection_prop",
    "ci_width",
    "replicates",
    "failures",
)
_STUDY_NUMERIC = STUDY_COLUMNS[5:11]


@dataclass(frozen=True)
class RenderSpec:
    """``truncate_at_zero`` clips rendered estimates only; ``digits`` rounds rendered numbers."""

    format: str = "csv"
    truncate_at_zero: bool = False
    alpha: float = 0.05
    digits: int | None = None

    def __post_init__(self):
        fmt = "text" if self.format in ("text-table", "table", "txt") else self.format
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}; expected one of {FORMATS}")
        object.__setattr__(self, "format", fmt)


def _num(x, digits=None):
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return None
    return round(x, digits) if digits is not None else x


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def jsonable(obj):
    """Recursively convert to JSON-safe values: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (float, np.floating, int, np.integer, bool, np.bool_)):
        return _num(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=False, ensure_ascii=False, allow_nan=False) + "\n"


def render_table(columns, rows, spec: RenderSpec, meta: dict | None = None) -> str:
    """Render a list of row dicts. ``rows`` values may be floats, ints, strings, or None."""
    rows = [{c: _num(r.get(c), spec.digits) if not isinstance(r.get(c), str) else r.get(c) for c in columns} for r in rows]
    if spec.format == "json":
        doc = {"columns": list(columns), "rows": []}
        for r in rows:
            nulls = [c for c in columns if r[c] is None]
            out = dict(r)
            if nulls:
                out["diagnostic"] = "non-finite or undefined: " + ", ".join(nulls)
            doc["rows"].append(out)
        if meta:
            doc["meta"] = jsonable(meta)
        return dumps(doc)
    if spec.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
        return buf.getvalue()
    cells = [list(columns)] + [[_cell(r[c]) if r[c] is not None else "NA" for c in columns] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(columns))]
    lines = ["  ".join(v.rjust(widths[j]) for j, v in enumerate(row)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def parse_table(text: str, format: str = "csv") -> list[dict]:
    """Inverse of :func:`render_table` for CSV and JSON (numeric fields become floats)."""
    if format == "json":
        return [{k: v for k, v in r.items() if k != "diagnostic"} for r in json.loads(text)["rows"]]
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        parsed = {}
        for k, v in r.items():
            if v == "":
                parsed[k] = None
                continue
            try:
                parsed[k] = float(v)
            except ValueError:
                parsed[k] = v
        out.append(parsed)
    return out


def trajectory_rows(traj: VimTrajectory, results, spec: RenderSpec) -> list[dict]:
    rows = []
    for j in range(traj.estimates.size):
        res: InferenceResult = results[j]
        est = float(traj.estimates[j])
        rows.append(
            {
                "time": float(traj.time_labels[j]),
                "estimate": max(0.0, est) if spec.truncate_at_zero else est,
                "se": res.se,
                "ci_lower": res.ci_lower,
                "ci_upper": res.ci_upper,
                "p_value": res.p_value,
            }
        )
    return rows


def render_trajectory(traj: VimTrajectory, results, spec: RenderSpec | None = None) -> str:
    """One row per timepoint: time label, estimate, se, interval, p-value."""
    spec = spec or RenderSpec()
    if len(results) != traj.estimates.size:
        raise ValueError("need one inference result per timepoint")
    meta = {"vim_kind": traj.kind, "variables": list(traj.variables), "measure": traj.measure.kind}
    return render_table(TRAJECTORY_COLUMNS, trajectory_rows(traj, results, spec), spec, meta)


def study_rows(report: MonteCarloReport) -> list[dict]:
    rows = []
    for r in sorted(report.rows, key=lambda r: r.key):
        d = {c: getattr(r, c) for c in STUDY_COLUMNS}
        d["variable"] = int(r.variable) + 1
        if not r.empirical_se_defined:
            d["empirical_se"] = None
        rows.append(d)
    return rows


def render_study(report: MonteCarloReport, spec: RenderSpec | None = None) -> str:
    """Operating characteristics per (VIM kind, variable, summary, estimator, n).

    Variables are numbered from 1 in renderings.
    """
    spec = spec or RenderSpec()
    meta = {"root_seed": report.root_seed, "scenario": report.scenario, "failures": list(report.failure_messages)}
    return render_table(STUDY_COLUMNS, study_rows(report), spec, meta)


def report_to_dict(report: MonteCarloReport) -> dict:
    return {
        "root_seed": report.root_seed,
        "scenario": report.scenario,
        "rows": [
            {**{c: getattr(r, c) for c in STUDY_COLUMNS}, "empirical_se_defined": r.empirical_se_defined}
            for r in report.rows
        ],
        "failures": list(report.failure_messages),
    }


def report_from_dict(doc: dict) -> MonteCarloReport:
    """Rebuild a report from :func:`report_to_dict` output (``null`` read back as NaN)."""
    rows = []
    for r in doc["rows"]:
        vals = {k: (math.nan if r[k] is None else r[k]) for k in STUDY_COLUMNS}
        vals["variable"] = int(vals["variable"])
        vals["n"] = int(vals["n"])
        vals["replicates"] = int(vals["replicates"])
        vals["failures"] = int(vals["failures"])
        rows.append(ReportRow(**vals, empirical_se_defined=bool(r.get("empirical_se_defined", True))))
    return MonteCarloReport(tuple(rows), int(doc["root_seed"]), doc.get("scenario", {}), tuple(doc.get("failures", ())))
