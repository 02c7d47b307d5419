"""Walk-forward evaluation, RMSE grids and cost profiling.

At every origin the model sees only the current sliding window; it is
refitted every ``refit_stride`` slides and queried on every slide. The
forecast is scored against the sample ``horizon_steps`` after the
window's newest value, and the window then slides by one sample.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .baseline import BASELINE, HORIZONS, PaperBaseline, _method_key
from .errors import ConfigError, DataError, GlyforecastError, InsufficientDataError
from .forecasters import ForecasterSpec, Hyper, Method, default_hyper, fit, forecast, horizon_free
from .series import UniformSeries, Window, horizon_to_steps, resample, slide, window_capacity

logger = logging.getLogger(__name__)

PSW_GRID = (3, 6, 12, 24, 36)
SF_GRID = (5, 10, 15)
PH_GRID = HORIZONS
GRID_METHODS = (Method.ARIMA, Method.RF, Method.SVR)
MIN_PREDICTIONS = 30

# Refit cadence (slides between fits) for table runs, sized so both tables
# over 5 patients x 14 days finish in minutes on one core. Forest growth
# at 36-h windows dominates, then the ARIMA order search.
DEFAULT_GRID_STRIDE = {Method.ARIMA: 24, Method.RF: 36, Method.SVR: 12, Method.PERSISTENCE: 1}


def rmse(predicted, observed) -> float:
    """Root mean squared difference of two equal-length sequences."""
    p = np.asarray(predicted, dtype=float)
    o = np.asarray(observed, dtype=float)
    if p.shape != o.shape or p.ndim != 1:
        raise DataError(f"length mismatch: {p.shape} vs {o.shape}")
    if p.size == 0:
        raise DataError("rmse of empty sequences")
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(o))):
        raise DataError("rmse inputs must be finite")
    d = p - o
    return math.sqrt(float(np.mean(d * d)))


@dataclass(frozen=True)
class ExperimentConfig:
    """One grid cell: method, window span, sampling interval, horizon."""

    method: Method
    psw_hours: float = 6
    sf_minutes: int = 5
    ph_minutes: int = 15
    hyper: Hyper = None
    seed: int = 0
    refit_stride: int = 1
    custom_grid: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        if self.hyper is None:
            object.__setattr__(self, "hyper", default_hyper(self.method))
        if float(self.psw_hours).is_integer():
            object.__setattr__(self, "psw_hours", int(self.psw_hours))
        if not self.custom_grid:
            for name, val, allowed in (("psw_hours", self.psw_hours, PSW_GRID),
                                       ("sf_minutes", self.sf_minutes, SF_GRID),
                                       ("ph_minutes", self.ph_minutes, PH_GRID)):
                if val not in allowed:
                    raise ConfigError(f"{name}={val} not in {allowed} (allow a custom grid to override)")
        if self.refit_stride < 1:
            raise ConfigError("refit_stride must be >= 1")
        if self.sf_minutes < 1 or self.ph_minutes < 1:
            raise ConfigError("sf_minutes and ph_minutes must be positive")
        try:
            window_capacity(self.psw_hours, self.sf_minutes)
            horizon_to_steps(self.ph_minutes, self.sf_minutes)
        except DataError as exc:
            raise ConfigError(str(exc)) from None
        ForecasterSpec(self.method, self.hyper, self.seed)

    @property
    def capacity(self) -> int:
        return window_capacity(self.psw_hours, self.sf_minutes)

    @property
    def horizon(self) -> tuple[int, int]:
        return horizon_to_steps(self.ph_minutes, self.sf_minutes)

    @property
    def key(self) -> tuple:
        return (self.method.value, self.psw_hours, self.sf_minutes, self.ph_minutes)

    def forecaster_spec(self) -> ForecasterSpec:
        return ForecasterSpec(self.method, self.hyper, self.seed)


@dataclass(frozen=True, eq=False)
class CellResult:
    config: ExperimentConfig
    rmse: float
    n_predictions: int
    mean_fit_ms: float
    mean_predict_ms: float
    peak_window_values: int
    clamp_count: int
    persistence_rmse: float
    effective_ph_minutes: int
    n_fits: int
    param_count: int
    flags: tuple[str, ...] = ()
    predictions: np.ndarray = field(default=None, repr=False)
    observed: np.ndarray = field(default=None, repr=False)
    fit_ms: np.ndarray = field(default=None, repr=False)
    predict_ms: np.ndarray = field(default=None, repr=False)


def required_length(config: ExperimentConfig, min_predictions: int = MIN_PREDICTIONS) -> int:
    steps, _ = config.horizon
    return config.capacity + steps + min_predictions - 1


def walk_forward(series: UniformSeries, config: ExperimentConfig,
                 min_predictions: int = MIN_PREDICTIONS, fit_cache: dict | None = None) -> CellResult:
    """Rolling-origin evaluation of one configuration on one series.

    Produces exactly ``N - w - h + 1`` forecasts for a series of ``N``
    samples (after decimation to ``config.sf_minutes``), window capacity
    ``w`` and horizon ``h`` steps.

    Raises
    ------
    InsufficientDataError
        If fewer than ``min_predictions`` forecasts would be made; carries
        the minimum series length in ``required``.

    Notes
    -----
    ``fit_cache`` lets calls on the same series share fits of methods whose
    fitted state does not depend on the horizon (ARIMA, persistence). The
    window at origin ``k`` is the same for every horizon, so the shared fit
    is exactly the one this call would compute.
    """
    s = series if series.interval_minutes == config.sf_minutes else resample(series, config.sf_minutes)
    steps, eff_ph = config.horizon
    w = config.capacity
    n = len(s)
    n_pred = n - w - steps + 1
    if n_pred < max(1, min_predictions):
        need = w + steps + max(1, min_predictions) - 1
        raise InsufficientDataError(
            f"series of {n} samples at {config.sf_minutes} min gives {max(n_pred, 0)} forecasts; "
            f"need >= {need} samples", required=need, available=n)

    spec = config.forecaster_spec()
    values = s.values
    window = Window.from_series(s, config.psw_hours, end=w)
    preds = np.empty(n_pred)
    obs = values[w - 1 + steps: w - 1 + steps + n_pred].copy()
    last = values[w - 1: w - 1 + n_pred]
    fit_ms, pred_ms = [], []
    clamps = 0
    flags: set[str] = set()
    params = 0
    model = None
    for k in range(n_pred):
        fresh = k % config.refit_stride == 0
        if fresh:
            if fit_cache is not None and horizon_free(config.method):
                key = (config.method, config.psw_hours, config.sf_minutes, config.refit_stride,
                       config.hyper, k)
                model = fit_cache.get(key)
                if model is None:
                    model = fit_cache[key] = fit(spec, window, steps)
            else:
                model = fit(spec, window, steps)
            fit_ms.append(model.fit_cost.wall_ms)
            flags.update(model.flags)
            params = max(params, model.param_count())
        t0 = time.perf_counter()
        value, clamped = forecast(model, steps, None if fresh else window)
        pred_ms.append((time.perf_counter() - t0) * 1e3)
        preds[k] = value
        clamps += clamped
        if k + 1 < n_pred:
            window = slide(window, values[w + k])
    return CellResult(
        config=config, rmse=rmse(preds, obs), n_predictions=n_pred,
        mean_fit_ms=float(np.mean(fit_ms)), mean_predict_ms=float(np.mean(pred_ms)),
        peak_window_values=w, clamp_count=int(clamps), persistence_rmse=rmse(last, obs),
        effective_ph_minutes=eff_ph, n_fits=len(fit_ms), param_count=params,
        flags=tuple(sorted(flags)), predictions=preds, observed=obs,
        fit_ms=np.asarray(fit_ms), predict_ms=np.asarray(pred_ms))


# -- grids ----------------------------------------------------------------------

def derive_seed(master_seed: int, *path: int) -> int:
    """64-bit seed for a grid cell, independent of evaluation order."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, path)])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass(frozen=True)
class GridSpec:
    """A Table-1 (window sweep at 5 min) or Table-2 (interval sweep at 6 h) run."""

    table: int
    master_seed: int = 0
    hypers: Mapping = field(default_factory=dict)
    strides: Mapping = field(default_factory=dict)
    methods: tuple = GRID_METHODS
    horizons: tuple = PH_GRID

    def __post_init__(self):
        if self.table not in (1, 2):
            raise ConfigError(f"table must be 1 or 2, got {self.table}")

    @property
    def rows(self) -> tuple:
        return PSW_GRID if self.table == 1 else SF_GRID

    def stride_for(self, method: Method) -> int:
        return int(self.strides.get(method, self.strides.get(method.value, DEFAULT_GRID_STRIDE[method])))

    def hyper_for(self, method: Method):
        return self.hypers.get(method, self.hypers.get(method.value)) or default_hyper(method)

    def configs(self) -> list[ExperimentConfig]:
        out = []
        for method in self.methods:
            method = Method.parse(method)
            for row in self.rows:
                for ph in self.horizons:
                    psw, sf = (row, 5) if self.table == 1 else (6, row)
                    idx = len(out)
                    out.append(ExperimentConfig(
                        method, psw, sf, ph, hyper=self.hyper_for(method),
                        seed=derive_seed(self.master_seed, idx),
                        refit_stride=self.stride_for(method)))
        return out

    def row_value(self, config: ExperimentConfig):
        return config.psw_hours if self.table == 1 else config.sf_minutes


@dataclass(frozen=True, eq=False)
class GridCell:
    config: ExperimentConfig
    rmse: float
    persistence_rmse: float
    per_patient: Mapping[str, CellResult]
    failed: tuple[str, ...]
    n_predictions: int
    mean_fit_ms: float
    mean_predict_ms: float
    clamp_count: int
    peak_window_values: int
    effective_ph_minutes: int

    @property
    def status(self) -> str:
        if not self.per_patient:
            return "failed"
        return "partial" if self.failed else "ok"


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    table: int | None
    cells: tuple[GridCell, ...]
    patients: tuple[str, ...]
    master_seed: int = 0

    def cell(self, method, row, ph_minutes) -> GridCell:
        m = Method.parse(method)
        for c in self.cells:
            cfg = c.config
            rv = cfg.psw_hours if self.table == 1 else cfg.sf_minutes
            if cfg.method is m and rv == row and cfg.ph_minutes == ph_minutes:
                return c
        raise KeyError((method, row, ph_minutes))


def _strip(result: CellResult) -> CellResult:
    # per-step arrays are not needed in reports and are costly to pickle
    return replace(result, predictions=None, observed=None, fit_ms=None, predict_ms=None)


def _run_task(task):
    """Evaluate the cells of one task for one patient, sharing horizon-free fits."""
    name, series, cells = task
    cache: dict = {}
    out = []
    for idx, config in cells:
        try:
            out.append((idx, name, _strip(walk_forward(series, config, fit_cache=cache)), None))
        except GlyforecastError as exc:
            out.append((idx, name, None, f"{type(exc).__name__}: {exc}"))
    return out


def _tasks(configs, named):
    groups: dict = {}
    for i, cfg in enumerate(configs):
        # cells differing only in horizon share ARIMA fits, so they run together
        key = (cfg.method, cfg.psw_hours, cfg.sf_minutes) if horizon_free(cfg.method) else (i,)
        groups.setdefault(key, []).append((i, cfg))
    return [(name, named[name], cells) for cells in groups.values() for name in sorted(named)]


def assemble_cell(config: ExperimentConfig, results: Mapping[str, CellResult],
                  failed: Sequence[str]) -> GridCell:
    """Aggregate per-patient results; RMSE is the unweighted mean over patients."""
    names = sorted(results)
    rs = [results[k] for k in names]
    steps_eff = config.horizon[1]
    if not rs:
        nan = float("nan")
        return GridCell(config, nan, nan, {}, tuple(sorted(failed)), 0, nan, nan, 0,
                        config.capacity, steps_eff)
    return GridCell(
        config=config,
        rmse=float(np.mean([r.rmse for r in rs])),
        persistence_rmse=float(np.mean([r.persistence_rmse for r in rs])),
        per_patient={k: results[k] for k in names},
        failed=tuple(sorted(failed)),
        n_predictions=sum(r.n_predictions for r in rs),
        mean_fit_ms=float(np.mean([r.mean_fit_ms for r in rs])),
        mean_predict_ms=float(np.mean([r.mean_predict_ms for r in rs])),
        clamp_count=sum(r.clamp_count for r in rs),
        peak_window_values=max(r.peak_window_values for r in rs),
        effective_ph_minutes=steps_eff,
    )


def _named(patients) -> dict[str, UniformSeries]:
    if isinstance(patients, Mapping):
        return dict(patients)
    return {f"patient_{i:03d}": s for i, s in enumerate(patients)}


def run_grid(patients, grid: GridSpec, jobs: int = 1, progress=None) -> EvaluationReport:
    """Evaluate every cell of ``grid`` for every patient.

    Cells are independent tasks; results are assembled in canonical cell
    order, so the report does not depend on ``jobs`` or completion order.
    A patient whose evaluation fails marks its cell ``partial``.
    """
    named = _named(patients)
    if not named:
        raise DataError("run_grid needs at least one patient series")
    configs = grid.configs()
    tasks = _tasks(configs, named)
    collected: dict[int, dict[str, CellResult]] = {i: {} for i in range(len(configs))}
    failures: dict[int, list[str]] = {i: [] for i in range(len(configs))}

    def accept(out):
        idx, name, res, err = out
        if res is None:
            logger.warning("cell %s failed for %s: %s", configs[idx].key, name, err)
            failures[idx].append(name)
        else:
            collected[idx][name] = res
        if progress is not None:
            progress(idx, name)

    if jobs <= 1:
        for t in tasks:
            for out in _run_task(t):
                accept(out)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for outs in pool.map(_run_task, tasks, chunksize=1):
                for out in outs:
                    accept(out)
    cells = tuple(assemble_cell(cfg, collected[i], failures[i]) for i, cfg in enumerate(configs))
    return EvaluationReport(grid.table, cells, tuple(sorted(named)), grid.master_seed)


# -- baseline comparison ---------------------------------------------------------

@dataclass(frozen=True)
class DeltaRow:
    method: str
    row: int
    ph_minutes: int
    ours: float
    paper: float

    @property
    def delta(self) -> float:
        return self.ours - self.paper


DELTA_NOTE = "different datasets - directional reference only"


@dataclass(frozen=True)
class DeltaTable:
    table: int
    rows: tuple[DeltaRow, ...]
    note: str = DELTA_NOTE


def compare_to_baseline(report: EvaluationReport, baseline: PaperBaseline = BASELINE) -> DeltaTable:
    """Per-cell ``ours - paper`` RMSE differences for a table-shaped report."""
    if report.table not in (1, 2):
        raise DataError("report is not shaped like a published table")
    ours = {}
    for c in report.cells:
        cfg = c.config
        row = cfg.psw_hours if report.table == 1 else cfg.sf_minutes
        ours[(_method_key(cfg.method), row, cfg.ph_minutes)] = c.rmse
    return baseline_deltas(report.table, ours, baseline)


def baseline_deltas(table: int, ours: Mapping, baseline: PaperBaseline = BASELINE) -> DeltaTable:
    """Deltas from a ``{(method, row, ph_minutes): rmse}`` mapping of grid methods."""
    ref = baseline.table(table)
    ours = {(_method_key(m), int(r), int(ph)): v for (m, r, ph), v in ours.items()}
    if set(ours) != set(ref):
        missing = sorted(set(ref) - set(ours))
        extra = sorted(set(ours) - set(ref))
        raise DataError(f"report shape differs from table {table}: "
                        f"missing {missing[:3]}, unexpected {extra[:3]}")
    rows = tuple(DeltaRow(k[0], k[1], k[2], ours[k], ref[k]) for k in sorted(ref, key=_canonical))
    return DeltaTable(table, rows)


def _canonical(key):
    method, row, ph = key
    return (("arima", "rf", "svr").index(method), row, ph)


# -- cost profile ----------------------------------------------------------------

@dataclass(frozen=True)
class CostSummary:
    mean_fit_ms: float
    p95_fit_ms: float
    mean_predict_ms: float
    p95_predict_ms: float
    max_slide_ms: float
    window_values: int
    memory_bytes: int
    param_count: int
    n_fits: int
    n_predictions: int


def profile_cell(config: ExperimentConfig, series: UniformSeries,
                 min_predictions: int = MIN_PREDICTIONS) -> CostSummary:
    """Wall-time and memory profile of a walk-forward run.

    The window memory proxy is its value count times 8 bytes (float64).
    ``max_slide_ms`` is the worst fit-plus-predict time of any refitted slide.
    """
    res = walk_forward(series, config, min_predictions=min_predictions)
    fit_ms, pred_ms = res.fit_ms, res.predict_ms
    refit_pred = pred_ms[::config.refit_stride][:len(fit_ms)]
    return CostSummary(
        mean_fit_ms=float(fit_ms.mean()), p95_fit_ms=float(np.percentile(fit_ms, 95)),
        mean_predict_ms=float(pred_ms.mean()), p95_predict_ms=float(np.percentile(pred_ms, 95)),
        max_slide_ms=float(np.max(fit_ms + refit_pred)),
        window_values=res.peak_window_values, memory_bytes=8 * res.peak_window_values,
        param_count=res.param_count, n_fits=res.n_fits, n_predictions=res.n_predictions)
