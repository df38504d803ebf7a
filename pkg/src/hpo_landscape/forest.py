"""Bootstrap ensembles of CART regression trees with three split criteria.

Trees are grown by an exact greedy search over midpoints between consecutive
distinct feature values. The inner loops are compiled with numba; training
sets here are tiny (a few dozen rows) so per-tree overhead dominates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

CRITERIA = ("squared", "absolute", "poisson")
_SQUARED, _ABSOLUTE, _POISSON = 0, 1, 2
_POISSON_FLOOR = 1e-9
_EPS = 1e-12


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    min_sample_leaves: int = 1
    min_impurity_decrease: float = 0.0
    max_depth: int = 20
    criterion: str = "squared"

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.n_estimators < 1 or self.min_sample_leaves < 1 or self.max_depth < 0:
            raise ValueError(f"invalid forest parameters: {self}")
        if self.min_impurity_decrease < 0:
            raise ValueError("min_impurity_decrease must be >= 0")

    @classmethod
    def from_mapping(cls, values: dict) -> "ForestParams":
        return cls(
            n_estimators=int(values["n_estimators"]),
            min_sample_leaves=int(values["min_sample_leaves"]),
            min_impurity_decrease=float(values["min_impurity_decrease"]),
            max_depth=int(values["max_depth"]),
            criterion=str(values["criterion"]),
        )


@dataclass(frozen=True)
class ForestModel:
    params: ForestParams
    n_features: int
    feature: np.ndarray     # (trees, nodes); -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_nodes: np.ndarray     # live nodes per tree
    depth: np.ndarray       # realized depth per tree
    samples: np.ndarray     # (trees, n) training row indices each tree saw

    @property
    def n_trees(self) -> int:
        return len(self.n_nodes)


@njit(cache=True)
def _leaf_value(ys, crit):
    if crit == _ABSOLUTE:
        return np.median(ys)
    return ys.mean()


@njit(cache=True)
def _prefix_costs(ys, crit, out):
    """out[i] = cost of ys[:i] for i in 0..n (ys already in split order)."""
    n = ys.size
    out[0] = 0.0
    if crit == _SQUARED:
        s = 0.0
        q = 0.0
        for i in range(n):
            s += ys[i]
            q += ys[i] * ys[i]
            out[i + 1] = max(q - s * s / (i + 1), 0.0)
    elif crit == _POISSON:
        s = 0.0
        ylogy = 0.0
        for i in range(n):
            v = ys[i]
            s += v
            if v > 0:
                ylogy += v * np.log(v)
            m = i + 1
            mu = max(s / m, _POISSON_FLOOR)
            out[i + 1] = max(ylogy - s * np.log(mu) - s + m * mu, 0.0)
    else:
        buf = np.empty(n)
        for i in range(n):
            # insertion keeps buf[:i+1] sorted
            v = ys[i]
            j = i
            while j > 0 and buf[j - 1] > v:
                buf[j] = buf[j - 1]
                j -= 1
            buf[j] = v
            m = i + 1
            k = m // 2
            hi = 0.0
            lo = 0.0
            for t in range(k):
                lo += buf[t]
                hi += buf[m - 1 - t]
            out[i + 1] = hi - lo


@njit(cache=True)
def _row_term(v, crit):
    if crit == _SQUARED:
        return v * v
    return v * np.log(v) if v > 0 else 0.0


@njit(cache=True)
def _sum_term(s, n, crit):
    # cost(set) = sum(row_term) - sum_term(sum, count)
    if crit == _SQUARED:
        return s * s / n
    mu = max(s / n, _POISSON_FLOOR)
    return s * np.log(mu) + s - n * mu


@njit(cache=True)
def _grow_tree(X, y, order, sample, crit, max_depth, min_leaf, min_decrease,
               feature, threshold, left, right, value):
    n_total = sample.size
    n_rows = X.shape[0]
    n_feat = X.shape[1]
    idx = sample.copy()
    cnt = np.zeros(n_rows, np.int64)
    cap = 2 * n_total + 2
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_total
    st_depth[0] = 0
    top = 1
    n_nodes = 1
    max_seen = 0
    pre = np.empty(n_total + 1)
    suf = np.empty(n_total + 1)
    xs = np.empty(n_total)
    ys = np.empty(n_total)
    rev = np.empty(n_total)
    node_y = np.empty(n_total)
    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        if depth > max_seen:
            max_seen = depth
        m = end - start
        for i in range(m):
            node_y[i] = y[idx[start + i]]
        value[node] = _leaf_value(node_y[:m], crit)
        feature[node] = -1
        _prefix_costs(node_y[:m], crit, pre)
        parent_cost = pre[m]
        if depth >= max_depth or m < 2 * min_leaf or parent_cost <= _EPS:
            continue
        for i in range(start, end):
            cnt[idx[i]] += 1
        best_cost = np.inf
        best_f = -1
        best_thr = 0.0
        for f in range(n_feat):
            # walk the presorted rows, repeating each by its bootstrap multiplicity
            k = 0
            for t in range(n_rows):
                r = order[f, t]
                for _ in range(cnt[r]):
                    xs[k] = X[r, f]
                    ys[k] = y[r]
                    k += 1
            if not xs[0] < xs[m - 1]:
                continue
            if crit == _ABSOLUTE:
                _prefix_costs(ys[:m], crit, pre)
                for i in range(m):
                    rev[i] = ys[m - 1 - i]
                _prefix_costs(rev[:m], crit, suf)
                for i in range(min_leaf, m - min_leaf + 1):
                    if xs[i - 1] < xs[i]:
                        c = pre[i] + suf[m - i]
                        if c < best_cost - _EPS:
                            best_cost = c
                            best_f = f
                            best_thr = 0.5 * (xs[i - 1] + xs[i])
                continue
            # squared and poisson costs split into a constant plus a term in the sums
            S = 0.0
            Q = 0.0
            for i in range(m):
                S += ys[i]
                Q += _row_term(ys[i], crit)
            s = 0.0
            for i in range(min_leaf - 1):
                s += ys[i]
            for i in range(min_leaf, m - min_leaf + 1):
                s += ys[i - 1]
                if not xs[i - 1] < xs[i]:
                    continue
                b = m - i
                c = Q - _sum_term(s, i, crit) - _sum_term(S - s, b, crit)
                if c < best_cost - _EPS:
                    best_cost = c
                    best_f = f
                    best_thr = 0.5 * (xs[i - 1] + xs[i])
        for i in range(start, end):
            cnt[idx[i]] -= 1
        if best_f < 0:
            continue
        decrease = (parent_cost - best_cost) / n_total
        if decrease + _EPS < min_decrease:
            continue
        i = start
        j = end - 1
        while i <= j:
            if X[idx[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        st_node[top] = rnode
        st_start[top] = i
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = i
        st_depth[top] = depth + 1
        top += 1
    return n_nodes, max_seen


@njit(cache=True)
def _fit_forest(X, y, order, samples, crit, max_depth, min_leaf, min_decrease,
                feature, threshold, left, right, value, n_nodes, depth):
    for t in range(samples.shape[0]):
        nn, d = _grow_tree(X, y, order, samples[t], crit, max_depth, min_leaf, min_decrease,
                           feature[t], threshold[t], left[t], right[t], value[t])
        n_nodes[t] = nn
        depth[t] = d


@njit(cache=True)
def _predict(X, feature, threshold, left, right, value):
    n_trees = feature.shape[0]
    out = np.zeros(X.shape[0])
    for r in range(X.shape[0]):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if X[r, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[r] = acc / n_trees
    return out


def fit(params: ForestParams, X, y, seed=None, bootstrap: bool = True) -> ForestModel:
    """Train ``params.n_estimators`` trees, each on a bootstrap draw of size ``len(X)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ValueError(f"need a non-empty 2-D X matching y, got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite training data")
    if params.criterion == "poisson" and np.any(y < 0):
        raise ValueError("poisson criterion needs non-negative targets")
    n, T = X.shape[0], params.n_estimators
    if bootstrap:
        samples = np.random.default_rng(seed).integers(0, n, size=(T, n))
    else:
        samples = np.tile(np.arange(n), (T, 1))
    cap = 2 * n + 1
    feature = np.full((T, cap), -1, np.int64)
    threshold = np.zeros((T, cap))
    left = np.full((T, cap), -1, np.int64)
    right = np.full((T, cap), -1, np.int64)
    value = np.zeros((T, cap))
    n_nodes = np.zeros(T, np.int64)
    depth = np.zeros(T, np.int64)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    _fit_forest(X, y, order, samples.astype(np.int64), CRITERIA.index(params.criterion),
                params.max_depth, params.min_sample_leaves, float(params.min_impurity_decrease),
                feature, threshold, left, right, value, n_nodes, depth)
    return ForestModel(params, X.shape[1], feature, threshold, left, right, value,
                       n_nodes, depth, samples)


def predict(model: ForestModel, X) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return _predict(X, model.feature, model.threshold, model.left, model.right, model.value)


def predict_tree(model: ForestModel, t: int, X) -> np.ndarray:
    """Output of the ``t``-th tree alone."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    s = slice(t, t + 1)
    return _predict(X, model.feature[s], model.threshold[s], model.left[s],
                    model.right[s], model.value[s])
