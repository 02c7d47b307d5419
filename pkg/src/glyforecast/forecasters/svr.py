"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization with second-order
working-set selection. Variables are stacked as ``beta = [alpha, alpha*]``
with signs ``s = [+1, -1]``; the problem is::

    min 1/2 beta' Q beta + p' beta   s.t.  s' beta = 0,  0 <= beta <= C
    Q[i, j] = s_i s_j K(x_i, x_j),   p = [eps - y, eps + y]

and the regression function is ``sum (alpha - alpha*) K(x_i, x) + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConfigError, DataError

TAU = 1e-12


@dataclass(frozen=True)
class SVRHyper:
    C: float = 10.0
    epsilon: float = 1.0
    gamma: float | None = None  # None -> 1 / m
    tol: float = 1e-3
    max_iter: int = 1_000_000
    embedding_dim: int | None = None
    target: str = "delta"

    def __post_init__(self):
        if self.target not in ("delta", "level"):
            raise ConfigError("svr.target must be 'delta' or 'level'")
        if not self.C > 0:
            raise ConfigError("svr.C must be > 0")
        if not self.epsilon >= 0:
            raise ConfigError("svr.epsilon must be >= 0")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("svr.gamma must be > 0")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("svr.tol must be > 0 and svr.max_iter >= 1")
        if self.embedding_dim is not None and self.embedding_dim < 1:
            raise ConfigError("svr.embedding_dim must be >= 1")

    def resolved_gamma(self, n_features: int) -> float:
        return 1.0 / n_features if self.gamma is None else self.gamma


@dataclass(frozen=True, eq=False)
class SVRModel:
    support: np.ndarray       # standardized support vectors
    coef: np.ndarray          # alpha - alpha* for each support vector
    bias: float
    gamma: float
    mean: np.ndarray
    scale: np.ndarray
    alpha: np.ndarray         # full dual solution, kept for diagnostics
    alpha_star: np.ndarray
    iterations: int
    converged: bool
    kkt_violation: float

    @property
    def n_support(self) -> int:
        return len(self.coef)


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@numba.njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = K.shape[0]
    l2 = 2 * n
    beta = np.zeros(l2)
    s = np.empty(l2)
    G = np.empty(l2)
    for i in range(n):
        s[i] = 1.0
        s[n + i] = -1.0
        G[i] = eps - y[i]
        G[n + i] = eps + y[i]
    it = 0
    gap = np.inf
    while it < max_iter:
        # select i: max over I_up of -s G
        Gmax = -np.inf
        i = -1
        for t in range(l2):
            if s[t] > 0:
                if beta[t] < C and -G[t] >= Gmax:
                    Gmax = -G[t]
                    i = t
            else:
                if beta[t] > 0 and G[t] >= Gmax:
                    Gmax = G[t]
                    i = t
        ki = i % n if i >= 0 else 0
        Gmax2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(l2):
            kt = t % n
            if s[t] > 0:
                if beta[t] > 0:
                    if G[t] >= Gmax2:
                        Gmax2 = G[t]
                    grad_diff = Gmax + G[t]
                    if i >= 0 and grad_diff > 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = TAU
                        obj = -grad_diff * grad_diff / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
            else:
                if beta[t] < C:
                    if -G[t] >= Gmax2:
                        Gmax2 = -G[t]
                    grad_diff = Gmax - G[t]
                    if i >= 0 and grad_diff > 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = TAU
                        obj = -grad_diff * grad_diff / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
        gap = Gmax + Gmax2
        if gap < tol or j == -1:
            break
        it += 1
        kj = j % n
        Qij = s[i] * s[j] * K[ki, kj]
        old_i = beta[i]
        old_j = beta[j]
        if s[i] != s[j]:
            quad = K[ki, ki] + K[kj, kj] + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = beta[i] - beta[j]
            beta[i] += delta
            beta[j] += delta
            if diff > 0:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = diff
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = -diff
            if diff > 0:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = C - diff
            else:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = C + diff
        else:
            quad = K[ki, ki] + K[kj, kj] - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = beta[i] + beta[j]
            beta[i] -= delta
            beta[j] += delta
            if total > C:
                if beta[i] > C:
                    beta[i] = C
                    beta[j] = total - C
            else:
                if beta[j] < 0:
                    beta[j] = 0.0
                    beta[i] = total
            if total > C:
                if beta[j] > C:
                    beta[j] = C
                    beta[i] = total - C
            else:
                if beta[i] < 0:
                    beta[i] = 0.0
                    beta[j] = total
        d_i = beta[i] - old_i
        d_j = beta[j] - old_j
        for t in range(l2):
            kt = t % n
            G[t] += s[t] * (s[i] * K[ki, kt] * d_i + s[j] * K[kj, kt] * d_j)

    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    n_free = 0
    sum_free = 0.0
    for t in range(l2):
        yG = s[t] * G[t]
        if beta[t] >= C:
            if s[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif beta[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            n_free += 1
            sum_free += yG
    if n_free > 0:
        rho = sum_free / n_free
    else:
        rho = 0.5 * (ub + lb)
    return beta, -rho, it, gap


def max_kkt_violation(K, y, alpha, alpha_star, C, eps):
    """Maximal violating-pair gap ``m(beta) - M(beta)`` recomputed from scratch."""
    n = len(y)
    beta = np.r_[alpha, alpha_star]
    s = np.r_[np.ones(n), -np.ones(n)]
    Kfull = np.block([[K, -K], [-K, K]])
    G = Kfull @ beta + np.r_[eps - y, eps + y]
    up = ((s > 0) & (beta < C)) | ((s < 0) & (beta > 0))
    low = ((s > 0) & (beta > 0)) | ((s < 0) & (beta < C))
    score = -s * G
    if not up.any() or not low.any():
        return 0.0
    return float(max(score[up].max() - score[low].min(), 0.0))


def standardize(X, mean=None, scale=None):
    if mean is None:
        mean = X.mean(0)
        scale = X.std(0)
        scale = np.where(scale > 0, scale, 1.0)
    return (X - mean) / scale, mean, scale


def fit_svr(X, y, hyper: SVRHyper) -> SVRModel:
    """Train epsilon-SVR on ``(X, y)``; features are standardized first."""
    X = np.asarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise DataError("SVR needs a non-empty 2-D feature matrix with one row per target")
    Z, mean, scale = standardize(X)
    gamma = hyper.resolved_gamma(X.shape[1])
    K = np.ascontiguousarray(rbf_kernel(Z, Z, gamma))
    beta, bias, it, gap = _smo(K, y, float(hyper.C), float(hyper.epsilon), float(hyper.tol),
                               int(hyper.max_iter))
    n = len(y)
    alpha, alpha_star = beta[:n].copy(), beta[n:].copy()
    coef = alpha - alpha_star
    sv = coef != 0
    return SVRModel(Z[sv].copy(), coef[sv].copy(), float(bias), gamma, mean, scale,
                    alpha, alpha_star, int(it), bool(gap < hyper.tol), float(gap))


def svr_predict(model: SVRModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if model.n_support == 0:
        return np.full(len(X), model.bias)
    Z, _, _ = standardize(X, model.mean, model.scale)
    return rbf_kernel(Z, model.support, model.gamma) @ model.coef + model.bias
