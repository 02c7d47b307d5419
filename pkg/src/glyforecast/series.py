"""Glucose time-series substrate.

Readings, equally spaced series, decimation, the fixed-capacity sliding
window and the lag embedding that turns a window into supervised pairs.
Every object here is an immutable value; operations return new objects.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, NoPairsError

logger = logging.getLogger(__name__)

NOMINAL_INTERVAL_MINUTES = 5
MAX_INTERPOLATED_GAP = 2  # missing samples, i.e. 10 minutes at 5-min cadence
MIN_PSW_HOURS = 3
GLUCOSE_RANGE = (0.0, 1000.0)  # open interval, mg/dL

CSV_HEADER = ("timestamp", "glucose_mg_dl")


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GlucoseReading:
    """One interstitial glucose measurement (mg/dL) at a UTC timestamp."""

    timestamp: datetime
    value: float

    def __post_init__(self):
        object.__setattr__(self, "timestamp", _as_utc(self.timestamp).replace(microsecond=0))
        v = float(self.value)
        lo, hi = GLUCOSE_RANGE
        if not math.isfinite(v) or not lo < v < hi:
            raise DataError(f"glucose value {self.value!r} outside ({lo:g}, {hi:g}) mg/dL")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, eq=False)
class UniformSeries:
    """Equally spaced glucose series.

    The value at index ``i`` was sampled at ``start + i * interval_minutes``.
    """

    start: datetime
    interval_minutes: int
    values: np.ndarray

    def __post_init__(self):
        if int(self.interval_minutes) != self.interval_minutes or self.interval_minutes <= 0:
            raise DataError(f"interval_minutes must be a positive integer, got {self.interval_minutes!r}")
        object.__setattr__(self, "interval_minutes", int(self.interval_minutes))
        object.__setattr__(self, "start", _as_utc(self.start))
        vals = _frozen(self.values)
        if vals.ndim != 1:
            raise DataError("series values must be one-dimensional")
        if not np.all(np.isfinite(vals)):
            raise DataError("series values must be finite")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, UniformSeries):
            return NotImplemented
        return (
            self.start == other.start
            and self.interval_minutes == other.interval_minutes
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def timestamp_at(self, index: int) -> datetime:
        return self.start + timedelta(minutes=self.interval_minutes * index)

    def timestamps(self) -> list[datetime]:
        return [self.timestamp_at(i) for i in range(len(self))]

    @property
    def duration_hours(self) -> float:
        return len(self) * self.interval_minutes / 60.0


@dataclass(frozen=True)
class Segment:
    """A contiguous run of readings on the 5-minute grid."""

    series: UniformSeries
    interpolated: int = 0


@dataclass(frozen=True)
class GapSpan:
    """Span of missing data too long to interpolate."""

    start: datetime
    end: datetime

    @property
    def minutes(self) -> int:
        return int((self.end - self.start).total_seconds() // 60)


@dataclass(frozen=True)
class Segmentation:
    segments: tuple[Segment, ...]
    gaps: tuple[GapSpan, ...] = field(default_factory=tuple)


def segment_readings(raw: Iterable[GlucoseReading],
                     interval_minutes: int = NOMINAL_INTERVAL_MINUTES,
                     max_gap: int = MAX_INTERPOLATED_GAP) -> Segmentation:
    """Snap readings onto a regular grid and split at long gaps.

    Readings are placed in the nearest grid slot relative to the earliest
    timestamp; several readings in one slot are averaged. Runs of at most
    ``max_gap`` empty slots are filled by linear interpolation, longer runs
    split the data and are returned as :class:`GapSpan` records.
    """
    readings = sorted(raw, key=lambda r: r.timestamp)
    if not readings:
        raise DataError("no readings supplied")

    t0 = readings[0].timestamp
    step = interval_minutes * 60
    slots: dict[int, list[float]] = {}
    for r in readings:
        offset = (r.timestamp - t0).total_seconds()
        k = int(math.floor(offset / step + 0.5))
        slots.setdefault(k, []).append(r.value)

    keys = sorted(slots)
    grid = {k: float(np.mean(v)) for k, v in slots.items()}

    segments: list[Segment] = []
    gaps: list[GapSpan] = []
    run_keys = [keys[0]]

    def close(run):
        idx = np.array(run)
        full = np.arange(run[0], run[-1] + 1)
        vals = np.interp(full, idx, [grid[k] for k in run])
        seg_start = t0 + timedelta(seconds=step * run[0])
        segments.append(Segment(UniformSeries(seg_start, interval_minutes, vals),
                                interpolated=len(full) - len(run)))

    for prev, k in zip(keys, keys[1:]):
        missing = k - prev - 1
        if missing > max_gap:
            close(run_keys)
            gaps.append(GapSpan(t0 + timedelta(seconds=step * (prev + 1)),
                                t0 + timedelta(seconds=step * k)))
            run_keys = [k]
        else:
            run_keys.append(k)
    close(run_keys)
    return Segmentation(tuple(segments), tuple(gaps))


def ingest_readings(raw: Iterable[GlucoseReading],
                    min_hours: float = MIN_PSW_HOURS) -> UniformSeries:
    """Turn raw sensor readings into a 5-minute :class:`UniformSeries`.

    Short gaps (up to 10 minutes) are interpolated. When longer gaps split
    the trace, the longest segment is returned and the discarded spans are
    logged at WARNING level; use :func:`segment_readings` to inspect them.

    Raises
    ------
    DataError
        If ``raw`` is empty.
    InsufficientDataError
        If no segment covers at least ``min_hours``.
    """
    seg = segment_readings(raw)
    best = max(seg.segments, key=lambda s: len(s.series))
    required = int(round(min_hours * 60 / NOMINAL_INTERVAL_MINUTES))
    if len(best.series) < required:
        raise InsufficientDataError(
            f"longest contiguous segment has {len(best.series)} samples, "
            f"need {required} ({min_hours:g} h)",
            required=required, available=len(best.series))
    for g in seg.gaps:
        logger.warning("gap of %d min from %s to %s splits the trace", g.minutes, g.start, g.end)
    dropped = [s for s in seg.segments if s is not best]
    if dropped:
        logger.warning("discarded %d shorter segment(s) totalling %d samples",
                       len(dropped), sum(len(s.series) for s in dropped))
    return best.series


def resample(series: UniformSeries, target_interval_minutes: int) -> UniformSeries:
    """Decimate ``series`` to a coarser interval, keeping every k-th value from index 0."""
    src = series.interval_minutes
    if target_interval_minutes <= 0 or target_interval_minutes % src:
        raise DataError(
            f"target interval {target_interval_minutes} min is not a multiple of {src} min")
    k = target_interval_minutes // src
    if k == 1:
        return series
    return UniformSeries(series.start, target_interval_minutes, series.values[::k])


def window_capacity(psw_hours: float, interval_minutes: int) -> int:
    cap = psw_hours * 60 / interval_minutes
    if psw_hours <= 0 or abs(cap - round(cap)) > 1e-9:
        raise DataError(
            f"PSW of {psw_hours:g} h is not a whole number of {interval_minutes}-min samples")
    return int(round(cap))


@dataclass(frozen=True, eq=False)
class Window:
    """Fixed-span sliding window over a uniform series.

    ``series`` holds at most ``capacity`` values, oldest first. The window
    is *warm* once it holds exactly ``capacity`` values.
    """

    series: UniformSeries
    psw_hours: float
    capacity: int = field(init=False)

    def __post_init__(self):
        cap = window_capacity(self.psw_hours, self.series.interval_minutes)
        if len(self.series) > cap:
            raise DataError(f"window holds {len(self.series)} values, capacity is {cap}")
        object.__setattr__(self, "capacity", cap)

    @classmethod
    def from_series(cls, series: UniformSeries, psw_hours: float, end: int | None = None) -> "Window":
        """Window over the ``capacity`` values ending just before index ``end``."""
        cap = window_capacity(psw_hours, series.interval_minutes)
        end = len(series) if end is None else end
        lo = max(0, end - cap)
        sub = UniformSeries(series.timestamp_at(lo), series.interval_minutes, series.values[lo:end])
        return cls(sub, psw_hours)

    @property
    def values(self) -> np.ndarray:
        return self.series.values

    @property
    def is_warm(self) -> bool:
        return len(self.series) == self.capacity

    def __len__(self):
        return len(self.series)


def slide(window: Window, new_value: float) -> Window:
    """Drop the oldest value, append ``new_value`` as the newest one."""
    if not window.is_warm:
        raise DataError(f"window not warm ({len(window)}/{window.capacity} values)")
    v = float(new_value)
    if not math.isfinite(v):
        raise DataError(f"non-finite glucose value {new_value!r}")
    s = window.series
    vals = np.empty_like(s.values)
    vals[:-1] = s.values[1:]
    vals[-1] = v
    moved = UniformSeries(s.start + timedelta(minutes=s.interval_minutes), s.interval_minutes, vals)
    return Window(moved, window.psw_hours)


@dataclass(frozen=True, eq=False)
class LagDataset:
    """Supervised pairs: ``features[i]`` (oldest lag first) predicts ``targets[i]``."""

    features: np.ndarray
    targets: np.ndarray
    horizon_steps: int

    def __post_init__(self):
        if len(self.features) != len(self.targets):
            raise DataError("features and targets differ in length")

    def __len__(self):
        return len(self.targets)

    @property
    def embedding_dim(self) -> int:
        return self.features.shape[1]


def lag_pairs(values: Sequence[float], embedding_dim: int, horizon_steps: int):
    """Raw lag embedding of a 1-D array; returns possibly empty ``(X, y)``.

    Pair ``i`` maps ``values[i : i+m]`` to ``values[i+m+h-1]``.
    """
    if embedding_dim < 1 or horizon_steps < 1:
        raise DataError("embedding_dim and horizon_steps must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    m, h = embedding_dim, horizon_steps
    count = len(x) - m - h + 1
    if count <= 0:
        return np.empty((0, m)), np.empty(0)
    X = np.lib.stride_tricks.sliding_window_view(x, m)[:count]
    y = x[m + h - 1: m + h - 1 + count]
    return np.array(X), np.array(y)


def lag_embed(window: Window, embedding_dim: int, horizon_steps: int) -> LagDataset:
    """Lag-embed a window for direct ``horizon_steps``-ahead regression.

    Raises
    ------
    NoPairsError
        When ``len(window) < embedding_dim + horizon_steps``.
    """
    X, y = lag_pairs(window.values, embedding_dim, horizon_steps)
    if len(y) == 0:
        raise NoPairsError(
            f"window of {len(window)} values yields no pairs for m={embedding_dim}, h={horizon_steps}",
            required=embedding_dim + horizon_steps, available=len(window))
    return LagDataset(X, y, horizon_steps)


def horizon_to_steps(ph_minutes: int, sf_minutes: int) -> tuple[int, int]:
    """Convert a horizon in minutes into whole samples, rounding half up.

    Returns ``(steps, effective_ph_minutes)``.
    """
    if sf_minutes <= 0:
        raise DataError("sampling interval must be positive")
    if ph_minutes < sf_minutes:
        raise DataError(f"horizon {ph_minutes} min is shorter than the {sf_minutes}-min interval")
    steps = (2 * ph_minutes + sf_minutes) // (2 * sf_minutes)
    return steps, steps * sf_minutes


# -- CSV interface ------------------------------------------------------------

def _parse_ts(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return _as_utc(datetime.fromisoformat(text))


def _format_ts(ts: datetime) -> str:
    return _as_utc(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def read_readings_csv(path) -> list[GlucoseReading]:
    """Read a ``timestamp,glucose_mg_dl`` CSV; rows may be unsorted."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(GlucoseReading(_parse_ts(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_series_csv(series: UniformSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, v in enumerate(series.values):
            w.writerow((_format_ts(series.timestamp_at(i)), repr(float(v))))


def load_series(path) -> UniformSeries:
    return ingest_readings(read_readings_csv(path))
