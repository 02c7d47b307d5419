"""Report files: CSV cell tables, aligned text tables and run manifests.

``report.csv`` holds only quantities that are a pure function of the
inputs and seed, so reruns are byte-identical. Wall-clock timings go to a
separate ``costs.csv``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

from .baseline import BASELINE, HORIZONS, PaperBaseline
from .errors import DataError
from .evaluation import DeltaTable, EvaluationReport, baseline_deltas
from .forecasters import Method

REPORT_COLUMNS = ("method", "psw_hours", "sf_minutes", "ph_minutes", "rmse", "n_predictions",
                  "persistence_rmse", "effective_ph_minutes", "peak_window_values",
                  "clamp_count", "status", "failed_patients")
TIMING_COLUMNS = ("mean_fit_ms", "mean_predict_ms")
PER_PATIENT_COLUMNS = ("method", "psw_hours", "sf_minutes", "ph_minutes", "patient", "rmse",
                       "n_predictions", "persistence_rmse")
ROW_ORDER = ("arima", "rf", "svr", "persistence")


@dataclass(frozen=True)
class CellRecord:
    """One row of ``report.csv``; timings are present only in cost files."""

    method: str
    psw_hours: float
    sf_minutes: int
    ph_minutes: int
    rmse: float
    n_predictions: int
    persistence_rmse: float = math.nan
    effective_ph_minutes: int = 0
    peak_window_values: int = 0
    clamp_count: int = 0
    status: str = "ok"
    failed_patients: str = ""
    mean_fit_ms: float | None = None
    mean_predict_ms: float | None = None

    @property
    def sort_key(self):
        return (ROW_ORDER.index(self.method) if self.method in ROW_ORDER else len(ROW_ORDER),
                self.method, self.psw_hours, self.sf_minutes, self.ph_minutes)


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.6f}"
    return str(x)


def _psw(x: float):
    return int(x) if float(x).is_integer() else float(x)


def records_from_report(report: EvaluationReport) -> list[CellRecord]:
    out = []
    for c in report.cells:
        cfg = c.config
        out.append(CellRecord(
            cfg.method.value, cfg.psw_hours, cfg.sf_minutes, cfg.ph_minutes, c.rmse,
            c.n_predictions, c.persistence_rmse, c.effective_ph_minutes, c.peak_window_values,
            c.clamp_count, c.status, ";".join(c.failed), c.mean_fit_ms, c.mean_predict_ms))
    return sorted(out, key=lambda r: r.sort_key)


def write_records(records, path, timings: bool = False, manifest: "RunManifest | None" = None) -> None:
    """Write cell records; ``manifest`` is embedded as leading ``#`` lines."""
    cols = REPORT_COLUMNS + (TIMING_COLUMNS if timings else ())
    buf = io.StringIO()
    if manifest is not None:
        for line in manifest.to_json(timestamp=False).splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in sorted(records, key=lambda r: r.sort_key):
        w.writerow([_num(getattr(r, c)) for c in cols])
    Path(path).write_text(buf.getvalue())


def read_records(path) -> list[CellRecord]:
    """Read a CSV written by :func:`write_records`; manifest lines are skipped."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report file not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    if not lines:
        return []
    reader = csv.DictReader(lines)
    header = tuple(reader.fieldnames or ())
    if header not in (REPORT_COLUMNS, REPORT_COLUMNS + TIMING_COLUMNS):
        raise DataError(f"{path}: unexpected columns {','.join(header)}; "
                        f"expected {','.join(REPORT_COLUMNS)}[,{','.join(TIMING_COLUMNS)}]")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(CellRecord(
                method=Method.parse(row["method"]).value,
                psw_hours=_psw(float(row["psw_hours"])),
                sf_minutes=int(row["sf_minutes"]),
                ph_minutes=int(row["ph_minutes"]),
                rmse=float(row["rmse"]),
                n_predictions=int(row["n_predictions"]),
                persistence_rmse=float(row["persistence_rmse"]),
                effective_ph_minutes=int(row["effective_ph_minutes"]),
                peak_window_values=int(row["peak_window_values"]),
                clamp_count=int(row["clamp_count"]),
                status=row["status"],
                failed_patients=row["failed_patients"],
                mean_fit_ms=float(row["mean_fit_ms"]) if row.get("mean_fit_ms") else None,
                mean_predict_ms=float(row["mean_predict_ms"]) if row.get("mean_predict_ms") else None,
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_per_patient(report: EvaluationReport, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PER_PATIENT_COLUMNS)
    for c in sorted(report.cells, key=lambda c: _cell_key(c.config)):
        cfg = c.config
        for name, r in c.per_patient.items():
            w.writerow([cfg.method.value, cfg.psw_hours, cfg.sf_minutes, cfg.ph_minutes, name,
                        _num(r.rmse), r.n_predictions, _num(r.persistence_rmse)])
    Path(path).write_text(buf.getvalue())


def _cell_key(cfg):
    return (ROW_ORDER.index(cfg.method.value), cfg.psw_hours, cfg.sf_minutes, cfg.ph_minutes)


# -- text tables -----------------------------------------------------------------

def infer_table(records) -> int | None:
    """1 for a window sweep at 5 min, 2 for an interval sweep at 6 h, else ``None``."""
    psw = {r.psw_hours for r in records}
    sf = {r.sf_minutes for r in records}
    if sf == {5} and len(psw) > 1:
        return 1
    if psw == {6} and len(sf) > 1:
        return 2
    if psw == {6} and sf == {5}:
        return 1
    return None


def _label(method: str) -> str:
    return Method.parse(method).label


def render_table(records, table: int | None = None) -> str:
    """Aligned text table: one line per (method, row), one column per horizon."""
    records = sorted(records, key=lambda r: r.sort_key)
    if not records:
        return "no cells\n"
    table = infer_table(records) if table is None else table
    horizons = sorted({r.ph_minutes for r in records} | (set(HORIZONS) if table else set()))
    if table == 1:
        title, row_name, row_of = "RMSE (mg/dL), SF = 5 min", "PSW (h)", lambda r: r.psw_hours
    elif table == 2:
        title, row_name, row_of = "RMSE (mg/dL), PSW = 6 h", "SF (min)", lambda r: r.sf_minutes
    else:
        title, row_name, row_of = "RMSE (mg/dL)", "PSW/SF", lambda r: f"{_num_short(r.psw_hours)}h/{r.sf_minutes}m"
    grid: dict = {}
    for r in records:
        grid.setdefault((r.method, row_of(r)), {})[r.ph_minutes] = r
    header = ["Method", row_name] + [f"PH={ph}" for ph in horizons]
    lines = []
    for (method, row), cells in grid.items():
        vals = []
        for ph in horizons:
            rec = cells.get(ph)
            vals.append("-" if rec is None else _fmt2(rec.rmse) + ("*" if rec.status != "ok" else ""))
        lines.append([_label(method), _num_short(row)] + vals)
    text = _align(header, lines)
    out = [title, text]
    if any(r.status != "ok" for r in records):
        out.append("* partial or failed cell (see failed_patients in the CSV)")
    return "\n".join(out) + "\n"


def render_deltas(deltas: DeltaTable) -> str:
    rows: dict = {}
    for d in deltas.rows:
        rows.setdefault((d.method, d.row), {})[d.ph_minutes] = d
    row_name = "PSW (h)" if deltas.table == 1 else "SF (min)"
    header = ["Method", row_name] + [f"PH={ph}" for ph in HORIZONS]
    lines = []
    for (method, row), cells in rows.items():
        lines.append([_label(method), str(row)] +
                     [f"{_fmt2(cells[ph].ours)} ({cells[ph].delta:+.2f})" for ph in HORIZONS])
    title = f"Ours vs published table {deltas.table}: RMSE (ours - published), {deltas.note}"
    return title + "\n" + _align(header, lines) + "\n"


def deltas_from_records(records, table: int, baseline: PaperBaseline = BASELINE) -> DeltaTable:
    ours = {}
    for r in records:
        if r.method == "persistence":
            continue
        row = r.psw_hours if table == 1 else r.sf_minutes
        ours[(r.method, row, r.ph_minutes)] = r.rmse
    return baseline_deltas(table, ours, baseline)


def _fmt2(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.2f}"


def _num_short(x) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


def _align(header, rows) -> str:
    widths = [max(len(str(c)) for c in col) for col in zip(header, *rows)]
    fmt = lambda cells: "  ".join(str(c).ljust(w) if i < 2 else str(c).rjust(w)
                                  for i, (c, w) in enumerate(zip(cells, widths))).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep] + [fmt(r) for r in rows])


# -- manifest --------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """What a report was computed from.

    Inputs are identified by file name and content hash, not by directory,
    and execution settings that cannot change results (worker count) are
    left out, so equal manifests imply equal reports.
    """

    command: str
    resolved: dict
    input_hashes: dict
    master_seed: int
    version: str
    config_path: str | None = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))

    @classmethod
    def for_inputs(cls, command, resolved, inputs, master_seed, version, config_path=None):
        hashes = {Path(p).name: sha256_file(p) for p in inputs}
        return cls(command, dict(resolved), dict(sorted(hashes.items())), int(master_seed),
                   version, None if config_path is None else Path(config_path).name)

    def to_json(self, timestamp: bool = True) -> str:
        data = asdict(self)
        if not timestamp:
            data.pop("timestamp")
        return json.dumps(data, indent=2, sort_keys=True, default=str)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def same_run(self, other: "RunManifest") -> bool:
        return self.to_json(timestamp=False) == other.to_json(timestamp=False)
