"""Synthetic glucose traces and exactly known autoregressive processes.

Patients are a baseline plus a 24-h sinusoid, gamma-shaped meal bumps
that repeat daily, and AR(1) noise with stationary SD ``ar_sigma``, all
soft-clipped into [40, 400] mg/dL.
The AR generator exists so that estimator recovery can be checked
against known coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError
from .forecasters import make_rng
from .forecasters.arima import ar_is_stationary
from .series import UniformSeries

SAMPLES_PER_DAY = 288
INTERVAL_MINUTES = 5
DEFAULT_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
CLIP_RANGE = (40.0, 400.0)
_CLIP_SOFTNESS = 20.0


@dataclass(frozen=True)
class Meal:
    time_of_day: float      # hours after midnight
    carb_impact: float      # peak rise, mg/dL
    absorption_tau: float   # minutes from meal to peak


DEFAULT_MEALS = (
    Meal(7.5, 100.0, 75.0),
    Meal(13.0, 110.0, 80.0),
    Meal(19.5, 90.0, 75.0),
)


@dataclass(frozen=True)
class SynthPatientSpec:
    baseline: float = 120.0
    circadian_amplitude: float = 20.0
    circadian_phase: float = 0.0       # hours; sinusoid crosses baseline upward here
    meals: tuple[Meal, ...] = DEFAULT_MEALS
    ar_phi: float = 0.9
    ar_sigma: float = 4.0
    days: int = 14
    seed: int = 0
    start: datetime = field(default=DEFAULT_START)

    def __post_init__(self):
        if self.days < 2:
            raise ConfigError("days must be >= 2")
        if not -1.0 < self.ar_phi < 1.0:
            raise ConfigError("ar_phi must lie in (-1, 1)")
        if self.ar_sigma < 0 or self.circadian_amplitude < 0:
            raise ConfigError("ar_sigma and circadian_amplitude must be >= 0")
        for meal in self.meals:
            if not 0 <= meal.time_of_day < 24 or meal.absorption_tau <= 0:
                raise ConfigError(f"invalid meal {meal}")


def soft_clip(values, lo=CLIP_RANGE[0], hi=CLIP_RANGE[1], k=_CLIP_SOFTNESS):
    """Identity on ``[lo+k, hi-k]``, smoothly saturating to ``[lo, hi]`` outside."""
    v = np.asarray(values, dtype=float)
    out = v.copy()
    top = v > hi - k
    out[top] = hi - k + k * np.tanh((v[top] - (hi - k)) / k)
    bot = v < lo + k
    out[bot] = lo + k - k * np.tanh(((lo + k) - v[bot]) / k)
    return out


def _meal_curve(minutes_after, impact, tau):
    # shape-2 gamma bump: zero slope at the meal, peak of ``impact`` at ``tau``
    t = np.maximum(minutes_after, 0.0) / tau
    return impact * t * t * np.exp(2.0 * (1.0 - t))


def deterministic_component(spec: SynthPatientSpec, minute_of_day) -> np.ndarray:
    """Noise-free glucose profile as a function of minute of day only."""
    mod = np.asarray(minute_of_day, dtype=float)
    hours = mod / 60.0
    out = spec.baseline + spec.circadian_amplitude * np.sin(
        2.0 * math.pi * (hours - spec.circadian_phase) / 24.0)
    for meal in spec.meals:
        since = mod - meal.time_of_day * 60.0
        # contributions of the same meal on the two previous days
        for back in (0.0, 1440.0, 2880.0):
            out = out + _meal_curve(since + back, meal.carb_impact, meal.absorption_tau)
    return out


def generate_patient(spec: SynthPatientSpec) -> UniformSeries:
    """5-minute trace of ``spec.days`` days, deterministic per ``spec.seed``."""
    n = spec.days * SAMPLES_PER_DAY
    start_minute = spec.start.hour * 60 + spec.start.minute
    minute_of_day = (start_minute + INTERVAL_MINUTES * np.arange(n)) % 1440
    det = deterministic_component(spec, minute_of_day)
    noise = np.zeros(n)
    if spec.ar_sigma > 0:
        rng = make_rng(spec.seed)
        eps = rng.standard_normal(n)
        phi = spec.ar_phi
        # ar_sigma is the stationary SD of the noise process
        innov = spec.ar_sigma * math.sqrt(1.0 - phi * phi)
        noise[0] = spec.ar_sigma * eps[0]
        for t in range(1, n):
            noise[t] = phi * noise[t - 1] + innov * eps[t]
    return UniformSeries(spec.start, INTERVAL_MINUTES, soft_clip(det + noise))


def patient_spec(index: int, seed: int, days: int = 14) -> SynthPatientSpec:
    """Default patient with modest per-patient variation in level, rhythm and meals."""
    rng = make_rng((int(seed) * 1_000_003 + int(index)) & 0xFFFFFFFFFFFFFFFF)
    u = rng.random(8)
    meals = tuple(
        replace(m, time_of_day=m.time_of_day + (u[k] - 0.5),
                carb_impact=m.carb_impact * (0.8 + 0.4 * u[k + 3]))
        for k, m in enumerate(DEFAULT_MEALS))
    return SynthPatientSpec(
        baseline=110.0 + 20.0 * u[6],
        circadian_amplitude=20.0,
        circadian_phase=4.0 * (u[7] - 0.5),
        meals=meals,
        days=days,
        seed=int(rng.integers(0, 2 ** 63)),
    )


def generate_ar(coeffs, sigma: float, n: int, seed: int, mean: float = 0.0,
                start: float | None = None, interval_minutes: int = INTERVAL_MINUTES) -> UniformSeries:
    """Exact AR(p) simulation around ``mean`` with N(0, sigma^2) innovations.

    The first ``10 * p`` samples are discarded as burn-in. Pre-sample values
    equal ``start`` (default: ``mean``).
    """
    phi = np.asarray(coeffs, dtype=float)
    if not ar_is_stationary(phi):
        raise ConfigError(f"AR coefficients {phi.tolist()} are not stationary")
    if n < 100:
        raise ConfigError("n must be >= 100")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    p = len(phi)
    burn = 10 * p
    total = n + burn
    eps = make_rng(seed).standard_normal(total) * sigma
    x = np.empty(total + p)
    x[:p] = (mean if start is None else start) - mean
    for t in range(total):
        acc = eps[t]
        for i in range(p):
            acc += phi[i] * x[p + t - 1 - i]
        x[p + t] = acc
    return UniformSeries(DEFAULT_START, interval_minutes, x[p + burn:] + mean)
