"""Random forest regression grown from scratch.

CART trees, each fitted on a bootstrap resample, with variance-reduction
splits searched over ``mtry`` randomly drawn lag features per node.
Tree growth runs under numba; the random stream is drawn up front from a
counter-based generator so a forest depends only on its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConfigError, DataError

_LEAF = -1
TARGETS = ("delta", "level")


@dataclass(frozen=True)
class ForestHyper:
    trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    mtry: int | None = None  # None -> ceil(m / 3)
    embedding_dim: int | None = None
    target: str = "delta"

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"rf.target must be one of {TARGETS}")
        if self.trees < 1:
            raise ConfigError("rf.trees must be >= 1")
        if self.max_depth < 0:
            raise ConfigError("rf.max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ConfigError("rf.min_leaf must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("rf.mtry must be >= 1")
        if self.embedding_dim is not None and self.embedding_dim < 1:
            raise ConfigError("rf.embedding_dim must be >= 1")

    def resolved_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return max(1, math.ceil(n_features / 3))
        return min(self.mtry, n_features)


@dataclass(frozen=True, eq=False)
class Forest:
    """Flat node arrays, one row per tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray

    @property
    def n_trees(self) -> int:
        return len(self.n_nodes)

    def param_count(self) -> int:
        used = np.arange(self.feature.shape[1]) < self.n_nodes[:, None]
        n_leaves = int(np.sum((self.feature == _LEAF) & used))
        n_internal = int(used.sum()) - n_leaves
        # internal: feature + threshold; leaf: value
        return 2 * n_internal + n_leaves


@numba.njit(cache=True)
def _grow_tree(X, y, sample, uniforms, max_depth, min_leaf, mtry,
               feature, threshold, left, right, value):
    n, m = X.shape
    # node work stack: (node id, start, end, depth) over ``sample``
    stack = np.empty((2 * n + 2, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    u = 0
    feats = np.arange(m)
    xs = np.empty(n)
    ys = np.empty(n)
    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        depth = stack[top, 3]
        size = hi - lo

        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(lo, hi):
            v = y[sample[k]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        feature[node] = -1
        if ymin == ymax:
            value[node] = ymin
        else:
            value[node] = total / size
        if depth >= max_depth or size < 2 * min_leaf or ymin == ymax:
            continue

        # partial Fisher-Yates draw of mtry features
        for k in range(m):
            feats[k] = k
        for k in range(mtry):
            r = k + int(uniforms[u] * (m - k))
            u += 1
            if r >= m:
                r = m - 1
            tmp = feats[k]
            feats[k] = feats[r]
            feats[r] = tmp

        parent = total * total / size
        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for kf in range(mtry):
            f = feats[kf]
            for k in range(size):
                xs[k] = X[sample[lo + k], f]
            order = np.argsort(xs[:size], kind="mergesort")
            for k in range(size):
                ys[k] = y[sample[lo + order[k]]]
            s_left = 0.0
            for k in range(size - 1):
                s_left += ys[k]
                nl = k + 1
                nr = size - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                a = xs[order[k]]
                b = xs[order[k + 1]]
                if a == b:
                    continue
                s_right = total - s_left
                gain = s_left * s_left / nl + s_right * s_right / nr - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0 or best_gain <= 1e-12 * abs(parent):
            continue

        # partition sample[lo:hi] in place
        i = lo
        j = hi - 1
        while i <= j:
            if X[sample[i], best_f] <= best_thr:
                i += 1
            else:
                t = sample[i]
                sample[i] = sample[j]
                sample[j] = t
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        stack[top, 0] = rnode
        stack[top, 1] = i
        stack[top, 2] = hi
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lnode
        stack[top, 1] = lo
        stack[top, 2] = i
        stack[top, 3] = depth + 1
        top += 1
    return n_nodes


@numba.njit(cache=True)
def _grow_forest(X, y, boots, uniforms, max_depth, min_leaf, mtry,
                 feature, threshold, left, right, value, n_nodes):
    for t in range(boots.shape[0]):
        sample = boots[t].copy()
        n_nodes[t] = _grow_tree(X, y, sample, uniforms[t], max_depth, min_leaf, mtry,
                                feature[t], threshold[t], left[t], right[t], value[t])


@numba.njit(cache=True)
def _per_tree(feature, threshold, left, right, value, x):
    T = feature.shape[0]
    out = np.empty(T)
    for t in range(T):
        node = 0
        while feature[t, node] != -1:
            if x[feature[t, node]] <= threshold[t, node]:
                node = left[t, node]
            else:
                node = right[t, node]
        out[t] = value[t, node]
    return out


def fit_random_forest(X, y, hyper: ForestHyper, rng: np.random.Generator) -> Forest:
    """Grow ``hyper.trees`` bootstrap CART trees on ``(X, y)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError("X must be 2-D with one row per target")
    n, m = X.shape
    if n == 0:
        raise DataError("random forest needs at least one training pair")
    T = hyper.trees
    mtry = hyper.resolved_mtry(m)
    max_nodes = 2 * n + 1
    boots = rng.integers(0, n, size=(T, n), dtype=np.int64)
    uniforms = rng.random((T, max_nodes * mtry))
    feature = np.full((T, max_nodes), _LEAF, dtype=np.int64)
    threshold = np.zeros((T, max_nodes))
    left = np.zeros((T, max_nodes), dtype=np.int64)
    right = np.zeros((T, max_nodes), dtype=np.int64)
    value = np.zeros((T, max_nodes))
    n_nodes = np.zeros(T, dtype=np.int64)
    _grow_forest(X, y, boots, uniforms, hyper.max_depth, hyper.min_leaf, mtry,
                 feature, threshold, left, right, value, n_nodes)
    width = int(n_nodes.max())
    return Forest(feature[:, :width].copy(), threshold[:, :width].copy(), left[:, :width].copy(),
                  right[:, :width].copy(), value[:, :width].copy(), n_nodes)


def per_tree_predictions(forest: Forest, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    return _per_tree(forest.feature, forest.threshold, forest.left, forest.right, forest.value, x)


def forest_predict(forest: Forest, x) -> float:
    """Arithmetic mean of the per-tree predictions for one lag vector."""
    return float(np.mean(per_tree_predictions(forest, x)))
