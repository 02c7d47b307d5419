"""ARIMA(p, d, q) with d in {0, 1}.

Model on the (possibly differenced) series ``w``::

    w[t] = c + sum_i ar[i] * w[t-1-i] + e[t] + sum_j ma[j] * e[t-1-j]

Coefficients are estimated by conditional sum of squares (CSS), started
from a Hannan-Rissanen regression. Orders are chosen by AIC over a grid.
All candidate models are scored on the same block of observations so the
criterion is comparable across ``d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.signal import lfilter

from ..errors import ConfigError, InsufficientDataError

logger = logging.getLogger(__name__)

MIN_OBS_PER_PARAM = 10
ROOT_MARGIN = 1e-6
COMMON_FACTOR_TOL = 0.1  # AR and MA inverse roots this close cancel out
VARIANCE_FLOOR = 1e-10


@dataclass(frozen=True)
class ArimaHyper:
    """Search space / fixed order for the ARIMA forecaster.

    ``order`` fixes ``(p, d, q)`` and skips the AIC search.
    """

    order: tuple[int, int, int] | None = None
    max_p: int = 5
    max_q: int = 3
    max_d: int = 1

    def __post_init__(self):
        if self.order is not None:
            p, d, q = self.order
            object.__setattr__(self, "order", (int(p), int(d), int(q)))
            if p < 0 or q < 0 or d not in (0, 1):
                raise ConfigError(f"invalid ARIMA order {self.order}: need p,q >= 0 and d in {{0,1}}")
        if self.max_p < 0 or self.max_q < 0 or self.max_d not in (0, 1):
            raise ConfigError("arima.max_p/max_q must be >= 0 and arima.max_d in {0,1}")

    def candidate_orders(self):
        if self.order is not None:
            return [self.order]
        return [(p, d, q) for d in range(self.max_d + 1)
                for p in range(self.max_p + 1) for q in range(self.max_q + 1)]


@dataclass(frozen=True, eq=False)
class ArimaParams:
    p: int
    d: int
    q: int
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float
    noise_variance: float
    aic: float = math.nan
    fallback: bool = False  # persistence used because no order fitted
    tried: tuple = field(default_factory=tuple)

    @property
    def n_params(self) -> int:
        return self.p + self.q + 2


def ar_is_stationary(coeffs) -> bool:
    """True when ``1 - sum ar[i] z^(i+1)`` has all roots outside the unit circle."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        return True
    return bool(np.all(np.abs(_companion_eigs(coeffs)) < 1.0 - ROOT_MARGIN))


def ma_is_invertible(coeffs) -> bool:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size == 0:
        return True
    return bool(np.all(np.abs(_companion_eigs(-coeffs)) < 1.0 - ROOT_MARGIN))


def has_common_factor(ar, ma, tol: float = COMMON_FACTOR_TOL) -> bool:
    """True when an AR and an MA inverse root (nearly) coincide.

    Such a pair cancels in the ARMA transfer function, so the model is not
    identified and only spends two extra parameters on fitting noise.
    """
    ar = np.asarray(ar, dtype=float)
    ma = np.asarray(ma, dtype=float)
    if ar.size == 0 or ma.size == 0:
        return False
    a = _companion_eigs(ar)
    b = np.roots(np.r_[1.0, ma])
    return bool(np.min(np.abs(a[:, None] - b[None, :])) < tol)


def _companion_eigs(coeffs):
    # roots of z^k - c1 z^(k-1) - ... - ck are the inverse roots of 1 - sum c_i z^i
    return np.roots(np.r_[1.0, -coeffs])


def css_residuals(w, intercept, ar, ma):
    """Conditional residuals of ``w``; element ``k`` belongs to ``w[p + k]``.

    Pre-sample errors are taken as zero.
    """
    p = len(ar)
    n = len(w)
    u = w[p:] - intercept
    for i in range(p):
        u = u - ar[i] * w[p - 1 - i:n - 1 - i]
    if len(ma):
        return lfilter([1.0], np.r_[1.0, ma], u)
    return u


@numba.njit(cache=True)
def _css_jacobian(w, theta, p, q, offset):
    """Residuals over the scored block and their derivatives w.r.t. (c, ar, ma)."""
    n_res = len(w) - p
    k = 1 + p + q
    e = np.zeros(n_res)
    de = np.zeros((n_res, k))
    c = theta[0]
    for r in range(n_res):
        t = p + r
        u = w[t] - c
        de[r, 0] = -1.0
        for i in range(p):
            u -= theta[1 + i] * w[t - 1 - i]
            de[r, 1 + i] = -w[t - 1 - i]
        for j in range(q):
            if r - 1 - j >= 0:
                th = theta[1 + p + j]
                u -= th * e[r - 1 - j]
                de[r, 1 + p + j] -= e[r - 1 - j]
                for a in range(k):
                    de[r, a] -= th * de[r - 1 - j, a]
        e[r] = u
    return e[offset:], de[offset:]


@numba.njit(cache=True)
def _css_lm(w, theta0, p, q, offset, max_iter):
    """Levenberg-Marquardt minimisation of the conditional sum of squares."""
    theta = theta0.copy()
    e, J = _css_jacobian(w, theta, p, q, offset)
    sse = e @ e
    lam = 1e-3
    rel = 1.0
    k = len(theta)
    for _ in range(max_iter):
        A = J.T @ J
        g = J.T @ e
        improved = False
        for _inner in range(20):
            M = A.copy()
            for a in range(k):
                M[a, a] += lam * max(A[a, a], 1e-12)
            step = np.linalg.solve(M, -g)
            trial = theta + step
            e2, J2 = _css_jacobian(w, trial, p, q, offset)
            sse2 = e2 @ e2
            if np.isfinite(sse2) and sse2 < sse:
                rel = (sse - sse2) / max(sse, 1e-300)
                theta = trial
                e = e2
                J = J2
                sse = sse2
                lam = max(lam / 3.0, 1e-12)
                improved = True
                break
            lam *= 4.0
        if not improved or rel < 1e-12:
            break
    return theta, sse


def _lagmat(x, lags, start):
    """Columns ``x[t-1], ..., x[t-lags]`` for ``t = start .. len(x)-1``."""
    n = len(x)
    return np.column_stack([x[start - i:n - i] for i in range(1, lags + 1)]) if lags else np.empty((n - start, 0))


def hannan_rissanen(w, p, q):
    """Initial ``(intercept, ar, ma)`` from a long-AR residual regression."""
    n = len(w)
    if q == 0:
        X = np.column_stack([np.ones(n - p), _lagmat(w, p, p)])
        beta = np.linalg.lstsq(X, w[p:], rcond=None)[0]
        return beta[0], beta[1:1 + p], np.empty(0)
    long_order = max(p + q, min(int(math.log(n) ** 2), n // 4))
    X = np.column_stack([np.ones(n - long_order), _lagmat(w, long_order, long_order)])
    beta = np.linalg.lstsq(X, w[long_order:], rcond=None)[0]
    resid = np.zeros(n)
    resid[long_order:] = w[long_order:] - X @ beta
    start = long_order + q
    X2 = np.column_stack([np.ones(n - start), _lagmat(w, p, start), _lagmat(resid, q, start)])
    beta2 = np.linalg.lstsq(X2, w[start:], rcond=None)[0]
    return beta2[0], beta2[1:1 + p], beta2[1 + p:]


def _fit_order(x, p, d, q, common_start):
    """CSS fit of one order scored on the common block; ``None`` if rejected."""
    w = np.diff(x) if d else x
    # index into residual vector of the first observation in the common block
    offset = common_start - d - p
    if len(w) - p - offset < 2:
        return None
    if q == 0:
        if p:
            # exact CSS on the common block is plain OLS over that block
            X = np.column_stack([np.ones(len(w) - p - offset), _lagmat(w, p, p + offset)])
            beta = np.linalg.lstsq(X, w[p + offset:], rcond=None)[0]
            c, ar = beta[0], beta[1:]
        else:
            c, ar = float(np.mean(w[offset:])), np.empty(0)
        ma = np.empty(0)
    else:
        c0, ar0, ma0 = hannan_rissanen(w, p, q)
        if not (ar_is_stationary(ar0) and ma_is_invertible(ma0)):
            ar0 = np.clip(ar0, -0.5, 0.5) if p else ar0
            ma0 = np.zeros(q)

        x0 = np.r_[c0, ar0, ma0].astype(np.float64)
        try:
            theta, _ = _css_lm(np.ascontiguousarray(w, dtype=np.float64), x0, p, q, offset, 200)
        except (ValueError, np.linalg.LinAlgError):
            return None
        if not np.all(np.isfinite(theta)):
            return None
        c, ar, ma = theta[0], theta[1:1 + p], theta[1 + p:]
    if not ar_is_stationary(ar) or not ma_is_invertible(ma) or has_common_factor(ar, ma):
        return None
    e = css_residuals(w, c, ar, ma)[offset:]
    sse = float(e @ e)
    n_eff = len(e)
    sigma2 = max(sse / n_eff, VARIANCE_FLOOR)
    aic = n_eff * math.log(sigma2) + 2 * (p + q + 2)
    return ArimaParams(p, d, q, np.asarray(ar, float), np.asarray(ma, float),
                       float(c), sigma2, aic)


def feasible_orders(n, hyper: ArimaHyper):
    out = [o for o in hyper.candidate_orders() if n >= MIN_OBS_PER_PARAM * (o[0] + o[2] + 1)]
    if hyper.order is not None and not out:
        p, _, q = hyper.order
        raise InsufficientDataError(
            f"ARIMA{hyper.order} needs >= {MIN_OBS_PER_PARAM * (p + q + 1)} values, got {n}",
            required=MIN_OBS_PER_PARAM * (p + q + 1), available=n)
    return out


def fit_arima(values, hyper: ArimaHyper | None = None) -> ArimaParams:
    """Fit ARIMA to ``values`` choosing the order with the lowest AIC.

    Orders whose estimate is non-stationary, non-invertible or has nearly
    cancelling AR and MA factors are skipped, so the next-best AIC wins. When every order fails, a persistence model
    (ARIMA(0,1,0) without drift) is returned with ``fallback=True``.
    """
    hyper = hyper or ArimaHyper()
    x = np.asarray(values, dtype=float)
    orders = feasible_orders(len(x), hyper)
    common_start = max((o[0] + o[1] for o in orders), default=0)
    best = None
    tried = []
    for p, d, q in orders:
        res = _fit_order(x, p, d, q, common_start)
        tried.append(((p, d, q), None if res is None else res.aic))
        if res is None:
            continue
        if best is None or res.aic < best.aic - 1e-9:
            best = res
    if best is None:
        logger.info("no ARIMA order accepted on %d values; using persistence", len(x))
        return ArimaParams(0, 1, 0, np.empty(0), np.empty(0), 0.0,
                           float(np.var(np.diff(x))) if len(x) > 1 else 0.0,
                           fallback=True, tried=tuple(tried))
    return ArimaParams(best.p, best.d, best.q, best.ar_coeffs, best.ma_coeffs,
                       best.intercept, best.noise_variance, best.aic, False, tuple(tried))


def arima_forecast(params: ArimaParams, history, steps: int) -> np.ndarray:
    """Recursive 1..``steps`` ahead forecasts after the end of ``history``.

    Residuals are reconstructed over ``history`` with the fitted
    coefficients, future shocks are set to zero, and differenced forecasts
    are integrated back to levels.
    """
    x = np.asarray(history, dtype=float)
    if params.fallback:
        return np.full(steps, x[-1])
    w = np.diff(x) if params.d else x
    p, q = params.p, params.q
    ar, ma, c = params.ar_coeffs, params.ma_coeffs, params.intercept
    if len(w) < p:
        raise InsufficientDataError(f"history too short for ARIMA order p={p}",
                                    required=p + params.d, available=len(x))
    e = css_residuals(w, c, ar, ma) if q else np.empty(0)
    w_hist = list(w[-p:]) if p else []
    e_hist = list(e[-q:]) if q else []
    out = np.empty(steps)
    for k in range(steps):
        val = c
        for i in range(p):
            val += ar[i] * w_hist[-1 - i]
        for j in range(q):
            if j < len(e_hist):
                val += ma[j] * e_hist[-1 - j]
        w_hist.append(val)
        if q:
            e_hist.append(0.0)
        out[k] = val
    if params.d:
        out = x[-1] + np.cumsum(out)
    return out
