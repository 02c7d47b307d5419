"""``glyforecast`` command line: synth, evaluate, grid, report, profile.

Settings resolve as command-line flag, then JSON config file, then
built-in default. Exit codes: 0 ok, 1 configuration error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError, GlyforecastError
from .evaluation import (DEFAULT_GRID_STRIDE, GridSpec, ExperimentConfig, assemble_cell,
                         profile_cell, run_grid, walk_forward)
from .forecasters import ArimaHyper, ForestHyper, Method, SVRHyper, default_hyper
from .report import (RunManifest, deltas_from_records, infer_table, read_records, records_from_report,
                     render_deltas, render_table, write_per_patient, write_records)
from .series import load_series, write_series_csv
from .synth import generate_patient, patient_spec

logger = logging.getLogger("glyforecast")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
SEED_ENV = "GLYFORECAST_SEED"

_HYPER_CLASSES = {"arima": ArimaHyper, "rf": ForestHyper, "svr": SVRHyper}
_TOP_KEYS = {"method", "psw_hours", "sf_minutes", "ph_minutes", "seed", "refit_stride",
             "table", "patients", "days", "allow_custom_grid"}
# ExperimentConfig field -> flag, so messages name what the user typed
_FLAG_NAMES = {"psw_hours": "--psw-hours", "sf_minutes": "--sf-minutes",
               "ph_minutes": "--ph-minutes", "refit_stride": "--refit-stride"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# -- configuration ------------------------------------------------------------------

def load_config(path) -> dict:
    """Read a JSON config; nested ``{"rf": {...}}`` and dotted ``"rf.trees"`` keys both work."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"--config: file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--config: {p} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("--config: top level must be an object")
    cfg: dict = {}
    for key, val in raw.items():
        head, _, tail = key.partition(".")
        if tail:
            cfg.setdefault(head, {})[tail] = val
        elif isinstance(val, dict):
            cfg.setdefault(head, {}).update(val)
        else:
            cfg[head] = val
    for key in cfg:
        if key not in _TOP_KEYS | set(_HYPER_CLASSES) | {"stride"}:
            raise ConfigError(f"--config: unknown key {key!r}")
    return cfg


def hyper_from_config(method: Method, cfg: dict):
    if method is Method.PERSISTENCE:
        return None
    section = dict(cfg.get(method.value, {}))
    cls = _HYPER_CLASSES[method.value]
    names = {f.name for f in fields(cls)}
    unknown = set(section) - names
    if unknown:
        raise ConfigError(f"--config: unknown {method.value} keys {sorted(unknown)}; allowed {sorted(names)}")
    if "order" in section and section["order"] is not None:
        section["order"] = tuple(section["order"])
    return cls(**section)


def strides_from_config(cfg: dict, args) -> dict:
    section = cfg.get("stride", {})
    out = {}
    for m in (Method.ARIMA, Method.RF, Method.SVR):
        flag = getattr(args, f"stride_{m.value}", None)
        val = flag if flag is not None else section.get(m.value, DEFAULT_GRID_STRIDE[m])
        if int(val) < 1:
            raise ConfigError(f"--stride-{m.value} must be >= 1")
        out[m.value] = int(val)
    return out


def _resolve(args, cfg, name, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    if name in cfg:
        return cfg[name]
    return default


def resolve_seed(args, cfg) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env!r} is not an integer") from None
    return 0


def _flagify(msg: str) -> str:
    for field_name, flag in _FLAG_NAMES.items():
        msg = msg.replace(field_name, flag)
    return msg.replace("allow a custom grid", "pass --allow-custom-grid")


def _experiment(args, cfg) -> ExperimentConfig:
    method = Method.parse(_resolve(args, cfg, "method", "rf"))
    try:
        return ExperimentConfig(
            method=method,
            psw_hours=_resolve(args, cfg, "psw_hours", 6),
            sf_minutes=_resolve(args, cfg, "sf_minutes", 5),
            ph_minutes=_resolve(args, cfg, "ph_minutes", 15),
            hyper=hyper_from_config(method, cfg),
            seed=resolve_seed(args, cfg),
            refit_stride=_resolve(args, cfg, "refit_stride", 1),
            custom_grid=bool(args.allow_custom_grid or cfg.get("allow_custom_grid", False)),
        )
    except ConfigError as exc:
        raise ConfigError(_flagify(str(exc))) from None


def _load_inputs(paths) -> dict:
    out = {}
    for p in paths:
        path = Path(p)
        if not path.is_file():
            raise DataError(f"--input: file not found: {path}")
        name = path.stem
        if name in out:
            raise DataError(f"--input: duplicate patient name {name!r}")
        out[name] = load_series(path)
    return out


def _hyper_dict(hyper) -> dict | None:
    return None if hyper is None else asdict(hyper)


# -- commands -------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    n = int(_resolve(args, cfg, "patients", 5))
    days = int(_resolve(args, cfg, "days", 14))
    seed = resolve_seed(args, cfg)
    if days < 2:
        raise ConfigError(f"days ≥ 2 required (36 h window plus a 60 min horizon), got {days}")
    if n < 1:
        raise ConfigError("--patients must be >= 1")
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for i in range(n):
            path = out / f"patient_{i:03d}.csv"
            write_series_csv(generate_patient(patient_spec(i, seed, days=days)), path)
            paths.append(path)
    except OSError as exc:
        raise DataError(f"--out-dir: cannot write to {out}: {exc.strerror or exc}") from None
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    config = _experiment(args, cfg)
    patients = _load_inputs(args.input)
    results, failed = {}, []
    for name, series in sorted(patients.items()):
        results[name] = walk_forward(series, config)
    cell = assemble_cell(config, results, failed)
    steps, eff = config.horizon
    print(f"method={config.method.label} psw_hours={config.psw_hours} sf_minutes={config.sf_minutes} "
          f"ph_minutes={config.ph_minutes} (steps={steps}, effective {eff} min) refit_stride={config.refit_stride}")
    print(f"window_values={config.capacity} patients={len(results)} n_predictions={cell.n_predictions}")
    for name, r in results.items():
        print(f"  {name}: rmse={r.rmse:.4f} persistence_rmse={r.persistence_rmse:.4f} "
              f"n={r.n_predictions} fits={r.n_fits} clamps={r.clamp_count}"
              + (f" flags={','.join(r.flags)}" if r.flags else ""))
    print(f"rmse={cell.rmse:.4f} persistence_rmse={cell.persistence_rmse:.4f} "
          f"mean_fit_ms={cell.mean_fit_ms:.3f} mean_predict_ms={cell.mean_predict_ms:.3f}")
    if args.out:
        from .evaluation import EvaluationReport
        report = EvaluationReport(None, (cell,), tuple(sorted(results)), config.seed)
        manifest = RunManifest.for_inputs(
            "evaluate", _resolved_single(config), args.input, config.seed, __version__, args.config)
        write_records(records_from_report(report), args.out, timings=True, manifest=manifest)
        print(f"wrote {args.out}")
    return EXIT_OK


def _resolved_single(config: ExperimentConfig) -> dict:
    return {"method": config.method.value, "psw_hours": config.psw_hours,
            "sf_minutes": config.sf_minutes, "ph_minutes": config.ph_minutes,
            "refit_stride": config.refit_stride, "seed": config.seed,
            "hyper": _hyper_dict(config.hyper), "allow_custom_grid": config.custom_grid}


def cmd_grid(args) -> int:
    cfg = load_config(args.config)
    table = int(_resolve(args, cfg, "table", None) or 0)
    if table not in (1, 2):
        raise ConfigError("--table must be 1 or 2")
    seed = resolve_seed(args, cfg)
    methods = (Method.ARIMA, Method.RF, Method.SVR)
    hypers = {m.value: hyper_from_config(m, cfg) for m in methods}
    strides = strides_from_config(cfg, args)
    grid = GridSpec(table=table, master_seed=seed, hypers=hypers, strides=strides)
    patients = _load_inputs(args.input)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"--out: cannot create {out}: {exc.strerror or exc}") from None

    n_cells = len(grid.configs())
    t0 = time.perf_counter()
    report = run_grid(patients, grid, jobs=jobs)
    elapsed = time.perf_counter() - t0

    resolved = {"table": table, "strides": strides,
                "hypers": {k: _hyper_dict(v) for k, v in hypers.items()}}
    manifest = RunManifest.for_inputs("grid", resolved, args.input, seed, __version__, args.config)
    records = records_from_report(report)
    write_records(records, out / "report.csv", manifest=manifest)
    write_records(records, out / "costs.csv", timings=True)
    write_per_patient(report, out / "per_patient.csv")
    (out / "manifest.json").write_text(manifest.to_json() + "\n")
    header = "".join(f"# {ln}\n" for ln in manifest.to_json(timestamp=False).splitlines())
    text = render_table(records, table)
    deltas = render_deltas(deltas_from_records(records, table))
    (out / "report.txt").write_text(header + text)
    (out / "deltas.txt").write_text(deltas)
    print(text, end="")
    print()
    print(deltas, end="")
    partial = sum(c.status != "ok" for c in report.cells)
    print(f"{n_cells} cells ({partial} partial/failed), {len(patients)} patients, "
          f"{elapsed:.1f} s with {jobs} job(s); wrote {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = read_records(args.input)
    if not records:
        text = "no cells\n"
    elif args.format == "csv":
        buf = Path(args.input).read_text()
        text = "".join(ln + "\n" for ln in buf.splitlines() if ln and not ln.startswith("#"))
    elif args.format == "delta":
        table = args.table or infer_table(records)
        if table not in (1, 2):
            raise DataError("report is not shaped like a published table; pass --table")
        text = render_deltas(deltas_from_records(records, table))
    else:
        text = render_table(records, args.table)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    config = _experiment(args, cfg)
    patients = _load_inputs(args.input)
    for name, series in sorted(patients.items()):
        c = profile_cell(config, series)
        print(f"{name}: method={config.method.label} window_values={c.window_values} "
              f"memory_bytes={c.memory_bytes} params={c.param_count} fits={c.n_fits} "
              f"predictions={c.n_predictions}")
        print(f"  fit_ms mean={c.mean_fit_ms:.3f} p95={c.p95_fit_ms:.3f}  "
              f"predict_ms mean={c.mean_predict_ms:.4f} p95={c.p95_predict_ms:.4f}  "
              f"max_slide_ms={c.max_slide_ms:.3f}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def _add(p, *names, default, help, **kw):
    # flag defaults stay None so config values can fill in; the help shows the effective default
    p.add_argument(*names, default=None, help=f"{help} (default: {default})", **kw)


def _add_cell_flags(p):
    _add(p, "--method", default="rf", help="forecaster: arima, rf, svr (alias svm) or persistence")
    _add(p, "--psw-hours", type=float, default=6, help="past sliding window span in hours")
    _add(p, "--sf-minutes", type=int, default=5, help="sampling interval in minutes")
    _add(p, "--ph-minutes", type=int, default=15, help="prediction horizon in minutes")
    _add(p, "--refit-stride", type=int, default=1, help="slides between refits")
    p.add_argument("--allow-custom-grid", action="store_true",
                   help="accept window/interval/horizon values outside the standard grid (default: off)")


def _add_common(p):
    _add(p, "--seed", type=int, default=f"${SEED_ENV} or 0", help="master random seed")
    _add(p, "--config", default="none", help="JSON config file")


def config_keys_help() -> str:
    """Epilog listing every JSON config key with its built-in default."""
    lines = ["JSON config keys (nested objects or dotted names, e.g. {\"rf\": {\"trees\": 50}} "
             "or {\"rf.trees\": 50}); flags override the file:"]
    for m in (Method.ARIMA, Method.RF, Method.SVR):
        hyper = default_hyper(m)
        keys = ", ".join(f"{m.value}.{f.name}={getattr(hyper, f.name)}" for f in fields(hyper))
        lines.append(f"  {keys}")
    lines.append("  " + ", ".join(f"stride.{m.value}={DEFAULT_GRID_STRIDE[m]}"
                                  for m in (Method.ARIMA, Method.RF, Method.SVR)))
    lines.append("  top level: " + ", ".join(sorted(_TOP_KEYS)))
    lines.append("None means derived from the data: rf.mtry=ceil(m/3), svr.gamma=1/m, "
                 "embedding_dim=round(sqrt(window)/2) clipped to [2, 6].")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="glyforecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress (default: off)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="write synthetic patient CSVs")
    _add(p, "--patients", type=int, default=5, help="number of patients")
    _add(p, "--days", type=int, default=14, help="days per patient (>= 2)")
    p.add_argument("--out-dir", default="data/synth", help="output directory (default: data/synth)")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="walk-forward evaluation of one grid cell", epilog=config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", nargs="+", required=True, help="patient CSV file(s) (required)")
    _add_cell_flags(p)
    p.add_argument("--out", help="write the cell as a CSV row here (default: none)")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="run the window sweep (table 1) or interval sweep (table 2)", epilog=config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", nargs="+", required=True, help="patient CSV file(s) (required)")
    _add(p, "--table", type=int, choices=(1, 2), default="required",
         help="1: PSW sweep at SF=5 min; 2: SF sweep at PSW=6 h")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    _add(p, "--jobs", type=int, default="available CPUs", help="worker processes")
    for m in (Method.ARIMA, Method.RF, Method.SVR):
        _add(p, f"--stride-{m.value}", type=int, default=DEFAULT_GRID_STRIDE[m],
             help=f"refit stride for {m.label}")
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="re-render a report CSV without recomputing")
    p.add_argument("--in", dest="input", required=True, help="report CSV written by this tool (required)")
    p.add_argument("--format", choices=("text", "csv", "delta"), default="text",
                   help="text table, normalized CSV, or published-table deltas (default: text)")
    _add(p, "--table", type=int, choices=(1, 2), default="inferred", help="table layout")
    p.add_argument("--out", help="write here instead of stdout (default: stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("profile", help="fit/predict wall time and memory proxy for one cell", epilog=config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", nargs="+", required=True, help="patient CSV file(s) (required)")
    _add_cell_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GlyforecastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
