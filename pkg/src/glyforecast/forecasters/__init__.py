"""Univariate forecasters behind one fit/predict contract.

ARIMA forecasts recursively from the window; random forest and SVR are
*direct* models trained on lag pairs that target ``horizon_steps`` ahead.
By default the direct models learn the change from the newest lag using
successive lag differences as features (``target="delta"``); trees cannot
extrapolate beyond the training levels otherwise.
A window whose values are all equal yields a constant predictor for every
method, and a last-value (persistence) forecaster is always available as
a reference.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from ..errors import ConfigError, DataError, InsufficientDataError
from ..series import Window, lag_embed
from .arima import ArimaHyper, ArimaParams, arima_forecast, fit_arima
from .forest import Forest, ForestHyper, fit_random_forest, forest_predict, per_tree_predictions
from .svr import SVRHyper, SVRModel, fit_svr, svr_predict

__all__ = [
    "Method", "ForecasterSpec", "FittedModel", "CostSample", "ArimaHyper", "ForestHyper",
    "SVRHyper", "fit", "predict", "forecast", "default_hyper", "embedding_dim_for",
    "make_rng", "horizon_free", "tree_predictions", "MIN_PAIRS", "CLAMP_RANGE",
]

MIN_PAIRS = 10
MIN_EMBEDDING = 2
MAX_EMBEDDING = 6
CLAMP_RANGE = (1.0, 1000.0)


class Method(str, enum.Enum):
    ARIMA = "arima"
    RF = "rf"
    SVR = "svr"
    PERSISTENCE = "persistence"

    @property
    def label(self) -> str:
        # row labels follow the published tables
        return {"arima": "ARIMA", "rf": "RF", "svr": "SVM", "persistence": "PERSIST"}[self.value]

    @classmethod
    def parse(cls, text) -> "Method":
        if isinstance(text, Method):
            return text
        key = str(text).strip().lower()
        if key == "svm":
            key = "svr"
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown method {text!r}; choose from arima, rf, svr, persistence") from None


Hyper = Union[ArimaHyper, ForestHyper, SVRHyper, None]


def default_hyper(method: Method) -> Hyper:
    return {Method.ARIMA: ArimaHyper(), Method.RF: ForestHyper(),
            Method.SVR: SVRHyper(), Method.PERSISTENCE: None}[Method.parse(method)]


_HYPER_TYPES = {Method.ARIMA: ArimaHyper, Method.RF: ForestHyper, Method.SVR: SVRHyper}


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def horizon_free(method: Method) -> bool:
    """True when one fit serves every horizon (recursive and naive forecasters)."""
    return Method.parse(method) in (Method.ARIMA, Method.PERSISTENCE)


@dataclass(frozen=True)
class ForecasterSpec:
    method: Method
    hyper: Hyper = None
    seed: int = 0

    def __post_init__(self):
        method = Method.parse(self.method)
        object.__setattr__(self, "method", method)
        hyper = self.hyper if self.hyper is not None else default_hyper(method)
        expected = _HYPER_TYPES.get(method)
        if expected is not None and not isinstance(hyper, expected):
            raise ConfigError(f"{method.value} needs {expected.__name__}, got {type(hyper).__name__}")
        object.__setattr__(self, "hyper", hyper)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class CostSample:
    wall_ms: float


@dataclass(frozen=True)
class ConstantState:
    value: float


@dataclass(frozen=True)
class PersistenceState:
    last: float


@dataclass(frozen=True, eq=False)
class ArimaState:
    params: ArimaParams
    history: np.ndarray


@dataclass(frozen=True, eq=False)
class DirectState:
    """Forest or SVR trained for one horizon, plus the lag vector it would use by default."""

    regressor: Any
    embedding_dim: int
    last_lags: np.ndarray
    target: str = "level"

    def features(self, lags) -> np.ndarray:
        lags = np.asarray(lags, dtype=float)
        return np.diff(lags) if self.target == "delta" else lags

    def offset(self, lags) -> float:
        # delta models predict the change from the newest lag
        return float(lags[-1]) if self.target == "delta" else 0.0


@dataclass(frozen=True, eq=False)
class FittedModel:
    spec: ForecasterSpec
    state: Any
    horizon_steps: int
    train_window_len: int
    fit_cost: CostSample
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def is_direct(self) -> bool:
        return isinstance(self.state, DirectState)

    def param_count(self) -> int:
        st = self.state
        if isinstance(st, (ConstantState, PersistenceState)):
            return 1 if isinstance(st, ConstantState) else 0
        if isinstance(st, ArimaState):
            return st.params.n_params
        reg = st.regressor
        if isinstance(reg, Forest):
            return reg.param_count()
        # support vectors, their coefficients, bias, standardization
        d = st.embedding_dim - 1 if st.target == "delta" else st.embedding_dim
        return reg.n_support * (d + 1) + 1 + 2 * d


def embedding_dim_for(window_len: int, requested: int | None = None) -> int:
    """Lag count for a direct model: ``round(sqrt(n) / 2)`` clipped to [2, 6] unless given."""
    if requested is not None:
        return requested
    return max(MIN_EMBEDDING, min(MAX_EMBEDDING, round(math.sqrt(window_len) / 2)))


def fit(spec: ForecasterSpec, window: Window, horizon_steps: int) -> FittedModel:
    """Train ``spec`` on a warm window for forecasts ``horizon_steps`` ahead.

    Deterministic given ``spec.seed`` and the window contents.
    """
    if not window.is_warm:
        raise DataError(f"window not warm ({len(window)}/{window.capacity} values)")
    if horizon_steps < 1:
        raise DataError("horizon_steps must be >= 1")
    t0 = time.perf_counter()
    values = window.values
    flags: list[str] = []
    method = spec.method
    if method is Method.PERSISTENCE:
        state: Any = PersistenceState(float(values[-1]))
    elif values.min() == values.max():
        state = ConstantState(float(values[0]))
        flags.append("constant")
    elif method is Method.ARIMA:
        params = fit_arima(values, spec.hyper)
        if params.fallback:
            flags.append("arima-fallback")
        state = ArimaState(params, values)
    else:
        target = spec.hyper.target
        m = embedding_dim_for(len(values), spec.hyper.embedding_dim)
        if target == "delta":
            m = max(m, 2)
        ds = lag_embed(window, m, horizon_steps)
        if len(ds) < MIN_PAIRS:
            raise InsufficientDataError(
                f"{len(ds)} lag pairs (m={m}, h={horizon_steps}); need >= {MIN_PAIRS}",
                required=m + horizon_steps + MIN_PAIRS - 1, available=len(values))
        if target == "delta":
            X, y = np.diff(ds.features, axis=1), ds.targets - ds.features[:, -1]
        else:
            X, y = ds.features, ds.targets
        if method is Method.RF:
            reg = fit_random_forest(X, y, spec.hyper, make_rng(spec.seed))
        else:
            reg = fit_svr(X, y, spec.hyper)
            if not reg.converged:
                flags.append("not-converged")
        state = DirectState(reg, m, values[-m:].copy(), target)
    cost = CostSample((time.perf_counter() - t0) * 1e3)
    return FittedModel(spec, state, horizon_steps, len(values), cost, tuple(flags))


def _raw_forecast(model: FittedModel, horizon_steps: int, recent) -> float:
    st = model.state
    if isinstance(st, ConstantState):
        # a later window may no longer be flat; its newest value equals the constant when it is
        return st.value if recent is None else float(recent[-1])
    if isinstance(st, PersistenceState):
        return st.last if recent is None else float(recent[-1])
    if isinstance(st, ArimaState):
        hist = st.history if recent is None else recent
        return float(arima_forecast(st.params, hist, horizon_steps)[-1])
    if horizon_steps != model.horizon_steps:
        raise DataError(
            f"direct model trained for {model.horizon_steps} step(s) cannot predict {horizon_steps}")
    lags = st.last_lags if recent is None else np.asarray(recent[-st.embedding_dim:], dtype=float)
    x = st.features(lags)
    if isinstance(st.regressor, Forest):
        return st.offset(lags) + forest_predict(st.regressor, x)
    return st.offset(lags) + float(svr_predict(st.regressor, x)[0])


def forecast(model: FittedModel, horizon_steps: int, window: Window | None = None) -> tuple[float, bool]:
    """Clamped forecast and whether clamping was applied.

    With ``window`` the fitted parameters are applied to that window's
    newest values (used between refits); otherwise to the training window.
    """
    if horizon_steps < 1:
        raise DataError("horizon_steps must be >= 1")
    recent = None if window is None else window.values
    raw = _raw_forecast(model, horizon_steps, recent)
    lo, hi = CLAMP_RANGE
    if not math.isfinite(raw):
        return (lo if raw < 0 else hi), True
    clamped = min(max(raw, lo), hi)
    return clamped, clamped != raw


def predict(model: FittedModel, horizon_steps: int, window: Window | None = None) -> float:
    """Glucose forecast (mg/dL) ``horizon_steps`` samples ahead, clamped to [1, 1000]."""
    return forecast(model, horizon_steps, window)[0]


def tree_predictions(model: FittedModel, window: Window | None = None) -> np.ndarray:
    """Per-tree outputs of a random-forest model on its newest lag vector."""
    st = model.state
    if not isinstance(st, DirectState) or not isinstance(st.regressor, Forest):
        raise DataError("per-tree predictions need a fitted random forest")
    lags = st.last_lags if window is None else window.values[-st.embedding_dim:]
    return st.offset(lags) + per_tree_predictions(st.regressor, st.features(lags))
