"""Command-line front end: ``lvim estimate|simulate|oracle|report``.

Every option is a config key. Values come from built-in defaults, then the
YAML file given by ``--config``, then command-line flags (highest
precedence). Flag values are parsed as YAML, so lists and mappings can be
passed inline: ``--variables "[x1, [x2, x3]]"``.

Exit status: 0 success, 2 configuration error, 3 data validation error,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__, learners
from .errors import ConfigError, DataValidationError, LvimError, MeasurementError, UnsupportedInferenceError
from .inference import VIM_KINDS, canonical_vim_kind, estimate_trajectory, infer_summary, summary_point, wald
from .panel import Schema, TimeWindow, VariableSet, load_dataset, make_folds, to_csv
from .predictiveness import PredictivenessMeasure
from .report import (
    RenderSpec,
    dumps,
    render_study,
    render_table,
    report_from_dict,
    report_to_dict,
)
from .simulation import DgpConfig, Scenario, default_beta, generate, oracle_truths, run_study, seed_for
from .summaries import SummarySpec

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION = 0, 2, 3, 4
COMMANDS = ("estimate", "simulate", "oracle", "report")


@dataclass(frozen=True)
class Key:
    name: str
    default: object
    commands: tuple
    help: str


KEYS = (
    Key("data", None, ("estimate",), "long-format CSV with one row per subject and time"),
    Key("schema", {}, ("estimate",), "column mapping: subject, time, outcome, features, missing_indicators"),
    Key("variables", ["x1"], ("estimate", "simulate", "oracle"),
        "variables of interest; each entry is a column name or a list of names forming one set"),
    Key("base", [], ("estimate", "simulate", "oracle"), "base-set column names, included in every model"),
    Key("vim_kinds", ["AddIn", "LeaveOut"], ("estimate", "simulate", "oracle"), "any of AddIn, LeaveOut"),
    Key("learner", {"kind": "Logistic"}, ("estimate", "simulate"),
        "learner kind name or mapping with kind, params, members, inner_cv_folds"),
    Key("measure", "AUC", ("estimate", "simulate", "oracle"), "AUC, RSquared or Accuracy"),
    Key("threshold", 0.5, ("estimate", "simulate", "oracle"), "classification threshold for Accuracy"),
    Key("summaries", ["mean", "slope"], ("estimate", "simulate", "oracle"),
        "mean, intercept, slope, autc:linear, autc:spline, gmrc:linear, gmrc:spline"),
    Key("window", None, ("estimate",), "[first, last] 1-based timepoint positions; default all"),
    Key("K", 5, ("estimate", "simulate"), "cross-fitting folds"),
    Key("alpha", 0.05, ("estimate", "simulate"), "test level; intervals have coverage 1 - alpha"),
    Key("seed", 0, ("estimate", "simulate", "oracle"), "root seed for folds, learners, and simulated data"),
    Key("T", 4, ("simulate", "oracle"), "timepoints of the simulated panel"),
    Key("rho", 0.0, ("simulate", "oracle"), "AR(1) correlation of the simulated features, in [0, 1)"),
    Key("cross_loading", 0.05, ("simulate", "oracle"), "loading of the source features on features 1-3"),
    Key("n", 1000, ("simulate",), "subjects per replicate"),
    Key("R", 200, ("simulate",), "replicates"),
    Key("estimator", "", ("simulate",), "label for the estimator column; defaults to the learner kind"),
    Key("timepoints", False, ("simulate",), "also report per-timepoint operating characteristics"),
    Key("oracle_N", 500_000, ("simulate", "oracle"), "oracle sample size (at least 100000)"),
    Key("oracle_seed", 20240101, ("simulate", "oracle"), "seed for the oracle draw"),
    Key("data_out", None, ("simulate",), "also write replicate 0's dataset to this CSV path"),
    Key("input", None, ("report",), "JSON report written by estimate or simulate"),
    Key("output", "lvim-out", COMMANDS, "output directory"),
    Key("format", "csv", COMMANDS, "table format: csv, json or text"),
    Key("truncate_at_zero", False, COMMANDS, "render negative estimates as 0 (stored values unchanged)"),
    Key("digits", None, COMMANDS, "round rendered numbers to this many decimals"),
)
KEY_NAMES = tuple(k.name for k in KEYS)
_SIM_DEFAULTS = {"variables": ["x1", "x2", "x3", "x8"], "base": ["x4", "x5", "x6", "x7"]}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lvim",
        description="Variable importance trajectories with efficient inference.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=_key_table(),
    )
    parser.add_argument("--version", action="version", version=f"lvim {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "estimate": "VIM trajectories and summaries from a CSV panel",
        "simulate": "replicated simulation study against oracle truths",
        "oracle": "oracle VIM truths for the simulated design",
        "report": "re-render a JSON report as a table",
    }
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, help=helps[cmd], description=helps[cmd],
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="YAML config file; flags override its values")
        for key in KEYS:
            if cmd in key.commands:
                p.add_argument(_flag(key.name), dest=key.name, metavar="VALUE", default=argparse.SUPPRESS,
                               help=f"{key.help} (default: {_show(_default(key, cmd))})")
    return parser


def _default(key: Key, command: str):
    if command in ("simulate", "oracle") and key.name in _SIM_DEFAULTS:
        return _SIM_DEFAULTS[key.name]
    return key.default


def _show(v) -> str:
    return yaml.safe_dump(v, default_flow_style=True).strip().removesuffix("...").strip()


def _key_table() -> str:
    lines = ["config keys (YAML file or --flag; flags take precedence):"]
    width = max(len(k.name) for k in KEYS)
    for k in KEYS:
        lines.append(f"  {k.name.ljust(width)}  [{','.join(k.commands)}] {k.help}")
    lines.append("")
    lines.append("environment: LVIM_THREADS sets the worker count (default: all CPUs)")
    lines.append("exit status: 0 ok, 2 config error, 3 data error, 4 estimation failure")
    return "\n".join(lines)


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Defaults, then file, then flags. Unknown or inapplicable keys are errors."""
    allowed = {k.name: k for k in KEYS if command in k.commands}
    cfg = {name: _default(k, command) for name, k in allowed.items()}
    for source, values in (("config file", file_values), ("flag", flag_values)):
        for name, value in values.items():
            if name == "command":
                if value != command:
                    raise ConfigError(f"command: config file is for {value!r}, invoked {command!r}")
                continue
            if name not in allowed:
                where = "unknown" if name not in KEY_NAMES else f"not used by {command!r}"
                raise ConfigError(f"{name}: {where} key in {source}")
            cfg[name] = value
    return cfg


def _read_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML in {path}: {exc}") from None
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    return raw


def _parse_flag_values(ns: argparse.Namespace) -> dict:
    out = {}
    for name in KEY_NAMES:
        if hasattr(ns, name):
            text = getattr(ns, name)
            try:
                out[name] = yaml.safe_load(text)
            except yaml.YAMLError:
                out[name] = text
            if out[name] is None and text.strip().lower() not in ("null", "~", "none", ""):
                out[name] = text
    return out


# ---------------------------------------------------------------------------
# validation


def _int(cfg, name, lo=None):
    v = cfg[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
        raise ConfigError(f"{name}: expected an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{name}: must be at least {lo}, got {v}")
    return v


def _float(cfg, name, lo=None, hi=None, closed_lo=True):
    v = cfg[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    v = float(v)
    if lo is not None and (v < lo or (not closed_lo and v == lo)) or hi is not None and v >= hi:
        raise ConfigError(f"{name}: {v} out of range")
    return v


def _bool(cfg, name):
    v = cfg[name]
    if not isinstance(v, bool):
        raise ConfigError(f"{name}: expected true or false, got {v!r}")
    return v


def _names(cfg, name) -> list:
    v = cfg[name]
    if v is None:
        return []
    if isinstance(v, (str, int)):
        v = [v]
    if not isinstance(v, list):
        raise ConfigError(f"{name}: expected a list of column names")
    return [str(x) for x in v]


def _variable_sets(cfg) -> list[list[str]]:
    v = cfg["variables"]
    if isinstance(v, (str, int)):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError("variables: expected a nonempty list")
    out = []
    for entry in v:
        names = [str(x) for x in entry] if isinstance(entry, list) else [str(entry)]
        if not names:
            raise ConfigError("variables: empty variable set")
        out.append(names)
    return out


def _common(cfg) -> dict:
    try:
        measure = PredictivenessMeasure(cfg["measure"], _float(cfg, "threshold"))
    except ValueError as exc:
        raise ConfigError(f"measure: {exc}") from None
    try:
        summaries = [SummarySpec.parse(s) for s in (cfg["summaries"] or [])]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"summaries: {exc}") from None
    kinds = cfg["vim_kinds"]
    kinds = [kinds] if isinstance(kinds, str) else kinds
    try:
        kinds = [canonical_vim_kind(k) for k in kinds]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"vim_kinds: {exc}") from None
    if not kinds:
        raise ConfigError(f"vim_kinds: choose at least one of {VIM_KINDS}")
    out = {"measure": measure, "summaries": summaries, "vim_kinds": kinds, "seed": _int(cfg, "seed", 0)}
    if "learner" in cfg:
        try:
            out["learner"] = learners.LearnerSpec.from_dict(cfg["learner"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"learner: {exc}") from None
    return out


def _render_spec(cfg) -> RenderSpec:
    digits = cfg["digits"]
    if digits is not None:
        digits = _int(cfg, "digits", 0)
    try:
        return RenderSpec(str(cfg["format"]), _bool(cfg, "truncate_at_zero"), 0.05, digits)
    except ValueError as exc:
        raise ConfigError(f"format: {exc}") from None


def _output_dir(cfg) -> Path:
    out = Path(str(cfg["output"]))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output: cannot create {out}: {exc.strerror}") from None
    return out


_EXT = {"csv": "csv", "json": "json", "text": "txt"}


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# commands


def _result_row(res, kind, variables, target, time=None) -> dict:
    return {
        "vim_kind": kind,
        "variables": " ".join(variables),
        "target": target,
        "time": time,
        "estimate": res["estimate"],
        "se": res["se"],
        "ci_lower": res["ci_lower"],
        "ci_upper": res["ci_upper"],
        "p_value": res["p_value"],
    }


RESULT_COLUMNS = ("vim_kind", "variables", "target", "time", "estimate", "se", "ci_lower", "ci_upper", "p_value")


def cmd_estimate(cfg: dict) -> int:
    common = _common(cfg)
    K = _int(cfg, "K", 2)
    alpha = _float(cfg, "alpha", 0.0, 1.0, closed_lo=False)
    spec = _render_spec(cfg)
    if cfg["data"] is None:
        raise ConfigError("data: no input CSV given")
    schema_raw = cfg["schema"] or {}
    if not isinstance(schema_raw, dict):
        raise ConfigError("schema: expected a mapping")
    try:
        schema = Schema.from_json(schema_raw)
    except (DataValidationError, TypeError) as exc:
        raise ConfigError(f"schema: {exc}") from None
    try:
        data = load_dataset(Path(str(cfg["data"])), schema, binary=common["measure"].binary)
    except OSError as exc:
        raise ConfigError(f"data: cannot read {cfg['data']}: {exc.strerror}") from None
    by_name = {nm: j for j, nm in enumerate(data.feature_names)}

    def cols(names, field):
        for nm in names:
            if nm not in by_name:
                raise ConfigError(f"{field}: unknown column {nm!r}")
        return tuple(by_name[nm] for nm in names)

    base_names = _names(cfg, "base")
    base = cols(base_names, "base")
    sets = []
    for names in _variable_sets(cfg):
        try:
            sets.append((names, VariableSet(cols(names, "variables"), base, data.p)))
        except ValueError as exc:
            raise ConfigError(f"variables: {exc}") from None
    window = None
    if cfg["window"] is not None:
        w = cfg["window"]
        if not (isinstance(w, list) and len(w) == 2 and all(isinstance(i, int) for i in w)):
            raise ConfigError("window: expected [first, last] timepoint positions")
        window = TimeWindow(w[0] - 1, w[1] - 1)
        try:
            window.validate(data.T)
        except ValueError as exc:
            raise ConfigError(f"window: {exc}") from None

    diagnostics = []
    if K > data.n:
        diagnostics.append(f"K reduced from {K} to {data.n}: fewer subjects than folds")
        K = data.n
    if data.n < 2:
        raise DataValidationError("data: at least two subjects are required")
    seed = common["seed"]
    folds = make_folds(data.n, K, seed)
    est_seed = np.random.SeedSequence(seed, spawn_key=(0, 2))
    cache: dict = {}
    results, rows_t, rows_s = [], [], []
    for kind in common["vim_kinds"]:
        for names, vs in sets:
            traj = estimate_trajectory(data, vs, common["learner"], common["measure"], folds, window, est_seed, kind, cache)
            per_t = []
            for j in range(traj.estimates.size):
                res = wald(float(traj.estimates[j]), traj.eif_matrix[:, j], alpha).as_dict()
                res["time"] = float(traj.time_labels[j])
                per_t.append(res)
                shown = {**res, "estimate": max(0.0, res["estimate"])} if spec.truncate_at_zero else res
                rows_t.append(_result_row(shown, kind, names, f"t{j + 1}", res["time"]))
            summ = {}
            for s in common["summaries"]:
                try:
                    res = infer_summary(traj, s, alpha).as_dict()
                except UnsupportedInferenceError as exc:
                    value = summary_point(traj, s)
                    res = {"estimate": value, "se": None, "ci_lower": None, "ci_upper": None, "p_value": None,
                           "alpha": alpha, "test_sidedness": s.sidedness, "diagnostics": [str(exc)]}
                summ[s.name] = res
                rows_s.append(_result_row(res, kind, names, s.name))
            results.append({
                "vim_kind": kind,
                "variables": names,
                "base": base_names,
                "predictiveness": {"larger": traj.predictiveness_pair[:, 0], "smaller": traj.predictiveness_pair[:, 1]},
                "timepoints": per_t,
                "summaries": summ,
                "diagnostics": traj.diagnostics,
            })
    out = _output_dir(cfg)
    doc = {
        "command": "estimate",
        "version": __version__,
        "seed": seed,
        "config": _echo(cfg),
        "data": {"n": data.n, "T": data.T, "p": data.p, "time_labels": data.time_labels,
                 "feature_names": list(data.feature_names)},
        "K": K,
        "results": results,
        "diagnostics": diagnostics,
    }
    _write(out / "report.json", dumps(doc))
    ext = _EXT[spec.format]
    _write(out / f"trajectories.{ext}", render_table(RESULT_COLUMNS, rows_t, spec))
    _write(out / f"summaries.{ext}", render_table(RESULT_COLUMNS, rows_s, spec))
    print(f"wrote {out / 'report.json'}, {out / f'trajectories.{ext}'}, {out / f'summaries.{ext}'}")
    for d in diagnostics:
        print(f"note: {d}", file=sys.stderr)
    return EXIT_OK


def _dgp(cfg) -> DgpConfig:
    T = _int(cfg, "T", 1)
    rho = _float(cfg, "rho", 0.0, 1.0)
    loading = _float(cfg, "cross_loading")
    try:
        return DgpConfig(default_beta(T), rho, loading)
    except ValueError as exc:
        raise ConfigError(f"rho: {exc}") from None


def _sim_columns(cfg, p) -> tuple[list[int], tuple]:
    names = [f"x{j + 1}" for j in range(p)]

    def idx(nm, field):
        nm = str(nm)
        if nm.isdigit():
            nm = f"x{nm}"
        if nm not in names:
            raise ConfigError(f"{field}: unknown column {nm!r}; simulated columns are x1..x{p}")
        return names.index(nm)

    variables = []
    for s in _variable_sets(cfg):
        if len(s) != 1:
            raise ConfigError("variables: simulation studies assess single variables")
        variables.append(idx(s[0], "variables"))
    base = tuple(idx(nm, "base") for nm in _names(cfg, "base"))
    overlap = set(variables) & set(base)
    if overlap:
        raise ConfigError(f"variables: {sorted(f'x{v + 1}' for v in overlap)} also in base")
    return variables, base


def cmd_simulate(cfg: dict) -> int:
    common = _common(cfg)
    config = _dgp(cfg)
    variables, base = _sim_columns(cfg, config.p)
    if not isinstance(cfg["estimator"], str):
        raise ConfigError("estimator: expected a string")
    try:
        scenario = Scenario(
            config=config,
            n=_int(cfg, "n", 2),
            R=_int(cfg, "R", 1),
            learner=common["learner"],
            measure=common["measure"],
            variables=tuple(variables),
            base=base,
            vim_kinds=tuple(common["vim_kinds"]),
            summaries=tuple(common["summaries"]),
            K=_int(cfg, "K", 2),
            alpha=_float(cfg, "alpha", 0.0, 1.0, closed_lo=False),
            estimator=cfg["estimator"],
            oracle_N=_int(cfg, "oracle_N", 100_000),
            oracle_seed=_int(cfg, "oracle_seed", 0),
            timepoints=_bool(cfg, "timepoints"),
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None
    spec = _render_spec(cfg)
    out = _output_dir(cfg)
    if cfg["data_out"] is not None:
        _write(Path(str(cfg["data_out"])), to_csv(generate(config, scenario.n, seed_for(common["seed"], 0, 0))))
    report = run_study(scenario, common["seed"])
    doc = {"command": "simulate", "version": __version__, "seed": common["seed"], "config": _echo(cfg),
           "report": report_to_dict(report)}
    _write(out / "study.json", dumps(doc))
    ext = _EXT[spec.format]
    _write(out / f"study.{ext}" if ext != "json" else out / "study_table.json", render_study(report, spec))
    if spec.format != "csv":
        _write(out / "study.csv", render_study(report, RenderSpec("csv", spec.truncate_at_zero, digits=spec.digits)))
    print(render_study(report, RenderSpec("text", digits=3)), end="")
    if report.failure_messages:
        print(f"note: {len(report.failure_messages)} replicate failures recorded in study.json", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(cfg: dict) -> int:
    common = _common(cfg)
    config = _dgp(cfg)
    variables, base = _sim_columns(cfg, config.p)
    N = _int(cfg, "oracle_N", 100_000)
    seed = _int(cfg, "oracle_seed", 0)
    varsets = [VariableSet((v,), base, config.p) for v in variables]
    truths = oracle_truths(config, N, seed, common["measure"], varsets, tuple(common["vim_kinds"]))
    spec = _render_spec(cfg)
    columns = ("vim_kind", "variable", "target", "value")
    rows, entries = [], []
    for (kind, s), truth in sorted(truths.items()):
        name = f"x{s[0] + 1}"
        summ = {}
        for j, v in enumerate(truth.values):
            rows.append({"vim_kind": kind, "variable": name, "target": f"t{j + 1}", "value": float(v)})
        for sp in common["summaries"]:
            summ[sp.name] = truth.summary(sp)
            rows.append({"vim_kind": kind, "variable": name, "target": sp.name, "value": summ[sp.name]})
        entries.append({"vim_kind": kind, "variable": name, "values": truth.values,
                        "larger": truth.larger, "smaller": truth.smaller, "summaries": summ})
    out = _output_dir(cfg)
    doc = {"command": "oracle", "version": __version__, "seed": seed, "config": _echo(cfg), "truths": entries}
    _write(out / "oracle.json", dumps(doc))
    ext = _EXT[spec.format]
    _write(out / f"oracle_table.{ext}", render_table(columns, rows, spec))
    print(render_table(columns, rows, RenderSpec("text", digits=4)), end="")
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    if cfg["input"] is None:
        raise ConfigError("input: no JSON report given")
    try:
        doc = json.loads(Path(str(cfg["input"])).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"input: cannot read {cfg['input']}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"input: not valid JSON: {exc}") from None
    spec = _render_spec(cfg)
    cmd = doc.get("command")
    if cmd == "simulate":
        text = render_study(report_from_dict(doc["report"]), spec)
    elif cmd == "estimate":
        rows = []
        for r in doc["results"]:
            for j, res in enumerate(r["timepoints"]):
                if spec.truncate_at_zero and res["estimate"] is not None:
                    res = {**res, "estimate": max(0.0, res["estimate"])}
                rows.append(_result_row(res, r["vim_kind"], r["variables"], f"t{j + 1}", res["time"]))
            for name, res in r["summaries"].items():
                rows.append(_result_row(res, r["vim_kind"], r["variables"], name))
        text = render_table(RESULT_COLUMNS, rows, spec)
    elif cmd == "oracle":
        rows = []
        for e in doc["truths"]:
            rows += [{"vim_kind": e["vim_kind"], "variable": e["variable"], "target": f"t{j + 1}", "value": v}
                     for j, v in enumerate(e["values"])]
            rows += [{"vim_kind": e["vim_kind"], "variable": e["variable"], "target": k, "value": v}
                     for k, v in e["summaries"].items()]
        text = render_table(("vim_kind", "variable", "target", "value"), rows, spec)
    else:
        raise DataValidationError(f"input: unrecognized report (command {cmd!r})")
    sys.stdout.write(text)
    return EXIT_OK


def _echo(cfg: dict) -> dict:
    return {k: cfg[k] for k in KEY_NAMES if k in cfg}


_DISPATCH = {"estimate": cmd_estimate, "simulate": cmd_simulate, "oracle": cmd_oracle, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = resolve_config(ns.command, _read_config_file(ns.config), _parse_flag_values(ns))
        return _DISPATCH[ns.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (MeasurementError, UnsupportedInferenceError, LvimError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"estimation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
