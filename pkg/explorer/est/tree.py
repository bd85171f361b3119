"""
Histogram decision trees shared by the forest and boosting estimators.

Features are bucketed once per fit into at most MAX_BINS quantile bins; trees are
then grown level by level, with one bincount per statistic per level, which keeps
pure-numpy training fast enough for repeated cross validation.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

MAX_BINS = 32


class BinMapper:
    """Per-feature split candidates: a row falls in bin j when edges[j-1] < x <= edges[j]."""

    def __init__(self, max_bins: int = MAX_BINS):
        self.max_bins = max_bins
        self.edges: list[np.ndarray] = []
        self.n_edges = np.zeros(0, dtype=np.int64)

    def fit(self, X: np.ndarray) -> "BinMapper":
        self.edges = []
        for j in range(X.shape[1]):
            unique = np.unique(X[:, j])
            if len(unique) <= 1:
                edges = np.zeros(0)
            elif len(unique) <= self.max_bins:
                edges = (unique[:-1] + unique[1:]) / 2.0
            else:
                levels = np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1]
                edges = np.unique(np.quantile(X[:, j], levels))
            self.edges.append(edges)
        self.n_edges = np.array([len(e) for e in self.edges], dtype=np.int64)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.uint8)
        for j, edges in enumerate(self.edges):
            out[:, j] = np.searchsorted(edges, X[:, j], side="left")
        return out


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            active = np.flatnonzero(f >= 0)
            if len(active) == 0:
                break
            at = node[active]
            go_left = X[active, f[active]] <= self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])
        return self.value[node]


def _impurity(n: np.ndarray, s: np.ndarray, ss: np.ndarray, criterion: str) -> np.ndarray:
    """Size-weighted impurity of a node from its count, sum and sum of squares."""
    safe_n = np.where(n > 0, n, 1.0)
    if criterion == "gini":
        # binary labels: n * 2p(1-p)
        return np.where(n > 0, 2.0 * s * (n - s) / safe_n, 0.0)
    return np.where(n > 0, ss - s * s / safe_n, 0.0)


def build_tree(
    binned: np.ndarray,
    mapper: BinMapper,
    y: np.ndarray,
    rows: np.ndarray,
    *,
    criterion: str,
    max_depth: int,
    min_leaf: int,
    max_features: int,
    rng: np.random.Generator,
    hess: Optional[np.ndarray] = None,
    leaf_reg: float = 0.0,
) -> Tree:
    """
    Grow one tree on binned[rows] (rows may repeat, as in a bootstrap sample).
    Leaves hold the mean of y, or sum(y) / (sum(hess) + leaf_reg) when hess is given.
    Ties between splits go to the lowest column index, then the lowest threshold.
    """
    p = binned.shape[1]
    n_slots = int(mapper.n_edges.max()) + 1 if p else 1
    q = min(max(1, max_features), p)

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    value = [0.0]

    level_nodes = np.array([0], dtype=np.int64)
    node_of = np.zeros(len(rows), dtype=np.int64)
    yr = y[rows]
    hr = hess[rows] if hess is not None else None

    for depth in range(max_depth + 1):
        L = len(level_nodes)
        cnt = np.bincount(node_of, minlength=L).astype(np.float64)
        s = np.bincount(node_of, weights=yr, minlength=L)
        ss = np.bincount(node_of, weights=yr * yr, minlength=L)
        if hr is not None:
            h = np.bincount(node_of, weights=hr, minlength=L)
            leaf = s / np.maximum(h + leaf_reg, 1e-12)
        else:
            leaf = s / np.maximum(cnt, 1.0)
        for i, g in enumerate(level_nodes):
            value[g] = float(leaf[i])

        parent = _impurity(cnt, s, ss, criterion)
        splittable = (cnt >= 2 * min_leaf) & (parent > 1e-12)
        if depth == max_depth or n_slots < 2 or not splittable.any():
            break

        if q >= p:
            F = np.broadcast_to(np.arange(p), (L, p))
        else:
            F = np.sort(np.argsort(rng.random((L, p)), axis=1)[:, :q], axis=1)
        width = F.shape[1]

        gathered = binned[rows[:, None], F[node_of]].astype(np.int64)
        keys = ((node_of[:, None] * width + np.arange(width)) * n_slots + gathered).ravel()
        size = L * width * n_slots
        shape = (L, width, n_slots)
        hc = np.bincount(keys, minlength=size).reshape(shape).astype(np.float64)
        hs = np.bincount(keys, weights=np.repeat(yr, width), minlength=size).reshape(shape)
        hss = np.bincount(keys, weights=np.repeat(yr * yr, width), minlength=size).reshape(shape)

        cl = np.cumsum(hc, axis=2)[:, :, :-1]
        sl = np.cumsum(hs, axis=2)[:, :, :-1]
        ssl = np.cumsum(hss, axis=2)[:, :, :-1]
        cr = cnt[:, None, None] - cl
        sr = s[:, None, None] - sl
        ssr = ss[:, None, None] - ssl

        gain = parent[:, None, None] - _impurity(cl, sl, ssl, criterion) - _impurity(cr, sr, ssr, criterion)
        valid = (
            (cl >= min_leaf)
            & (cr >= min_leaf)
            & (np.arange(n_slots - 1)[None, None, :] < mapper.n_edges[F][:, :, None])
            & splittable[:, None, None]
        )
        flat = np.where(valid, gain, -np.inf).reshape(L, -1)
        best = np.argmax(flat, axis=1)
        do_split = flat[np.arange(L), best] > 1e-12
        if not do_split.any():
            break

        best_feature = F[np.arange(L), best // (n_slots - 1)]
        best_bin = best % (n_slots - 1)
        split_ids = np.flatnonzero(do_split)
        first_child = len(feature)
        next_local = np.full(L, -1, dtype=np.int64)
        next_local[split_ids] = 2 * np.arange(len(split_ids))
        for k, i in enumerate(split_ids):
            g = level_nodes[i]
            f = int(best_feature[i])
            feature[g] = f
            threshold[g] = float(mapper.edges[f][best_bin[i]])
            left[g] = first_child + 2 * k
            right[g] = first_child + 2 * k + 1
            feature.extend((-1, -1))
            threshold.extend((0.0, 0.0))
            left.extend((-1, -1))
            right.extend((-1, -1))
            value.extend((0.0, 0.0))

        keep = do_split[node_of]
        rows = rows[keep]
        yr = yr[keep]
        if hr is not None:
            hr = hr[keep]
        local = node_of[keep]
        go_right = binned[rows, best_feature[local]] > best_bin[local]
        node_of = next_local[local] + go_right.astype(np.int64)
        level_nodes = np.arange(first_child, first_child + 2 * len(split_ids), dtype=np.int64)

    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )
