"""Random forest of weighted-Gini CART trees.

Each tree is grown on a bootstrap drawn with probability proportional to the
instance weights; the bootstrap multiplicities are the only weights the tree
sees. Identical feature rows are merged into one weighted row before growing,
which leaves every split decision unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..errors import DimensionMismatchError, SingleClassError


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # weighted class-1 fraction

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):  # children always follow their parent
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict_proba(self, X) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "Tree":
        return cls(np.asarray(data["feature"], dtype=int), np.asarray(data["threshold"], dtype=float),
                   np.asarray(data["left"], dtype=int), np.asarray(data["right"], dtype=int),
                   np.asarray(data["value"], dtype=float))


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf_weight: float = 1.0
    features_per_split: int | None = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    n_features: int
    max_depth: int | None
    min_leaf_weight: float
    features_per_split: int
    seed: int
    config: ForestConfig = field(default_factory=ForestConfig)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"forest expects {self.n_features} features, got shape {X.shape}")
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "type": "forest",
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "min_leaf_weight": self.min_leaf_weight,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data) -> "ForestModel":
        return cls(tuple(Tree.from_dict(t) for t in data["trees"]), int(data["n_features"]),
                   data["max_depth"], float(data["min_leaf_weight"]),
                   int(data["features_per_split"]), int(data["seed"]))


@njit(cache=True)
def _grow(X, w0, w1, rows, max_depth, min_leaf, k, seed):
    """Grow one tree over the merged rows ``rows`` of ``X``; depth-first, children
    numbered after their parent. ``max_depth < 0`` means unlimited."""
    np.random.seed(seed)
    n_feat = X.shape[1]
    cap = 2 * len(rows) + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    depth_of = np.zeros(cap, dtype=np.int64)

    # Explicit stack of (node id, start, stop) over a shared index buffer.
    buf = rows.copy()
    stack_node = np.zeros(cap, dtype=np.int64)
    stack_lo = np.zeros(cap, dtype=np.int64)
    stack_hi = np.zeros(cap, dtype=np.int64)
    top = 0
    n_nodes = 1
    stack_node[0], stack_lo[0], stack_hi[0] = 0, 0, len(rows)
    top = 1
    vals = np.empty(len(rows))
    while top > 0:
        top -= 1
        node, lo, hi = stack_node[top], stack_lo[top], stack_hi[top]
        idx = buf[lo:hi]
        W0 = 0.0
        W1 = 0.0
        for r in idx:
            W0 += w0[r]
            W1 += w1[r]
        W = W0 + W1
        value[node] = W1 / W
        if (W0 == 0.0 or W1 == 0.0 or hi - lo < 2
                or (max_depth >= 0 and depth_of[node] >= max_depth) or W < 2.0 * min_leaf):
            continue
        best_imp = np.inf
        best_f = -1
        best_thr = 0.0
        visited = 0
        order = np.random.permutation(n_feat)
        for f in order:
            if visited >= k:
                break
            m = hi - lo
            for i in range(m):
                vals[i] = X[idx[i], f]
            srt = np.argsort(vals[:m], kind="mergesort")
            if vals[srt[0]] == vals[srt[m - 1]]:
                continue  # constant features do not count towards k
            visited += 1
            c0 = 0.0
            c1 = 0.0
            f_imp = np.inf
            f_thr = 0.0
            for i in range(m - 1):
                r = idx[srt[i]]
                c0 += w0[r]
                c1 += w1[r]
                a = vals[srt[i]]
                b = vals[srt[i + 1]]
                if not a < b:
                    continue
                cl = c0 + c1
                cr = W - cl
                if cl < min_leaf or cr < min_leaf:
                    continue
                r0 = W0 - c0
                r1 = W1 - c1
                imp = (cl - (c0 * c0 + c1 * c1) / cl) + (cr - (r0 * r0 + r1 * r1) / cr)
                if imp < f_imp:
                    f_imp = imp
                    thr = 0.5 * (a + b)
                    if not (a <= thr and thr < b):
                        thr = a
                    f_thr = thr
            if f_imp < best_imp - 1e-12:
                best_imp = f_imp
                best_f = f
                best_thr = f_thr
        if best_f < 0:
            continue
        # Partition idx in place: rows going left first.
        i = lo
        j = hi - 1
        while i <= j:
            if X[buf[i], best_f] <= best_thr:
                i += 1
            else:
                tmp = buf[i]
                buf[i] = buf[j]
                buf[j] = tmp
                j -= 1
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        depth_of[n_nodes] = depth_of[node] + 1
        depth_of[n_nodes + 1] = depth_of[node] + 1
        # Push right first so the left subtree is expanded next.
        stack_node[top], stack_lo[top], stack_hi[top] = n_nodes + 1, i, hi
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top] = n_nodes, lo, i
        top += 1
        n_nodes += 2
    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes])


def forest_fit(X, y, w=None, config: ForestConfig | None = None, seed: int = 0) -> ForestModel:
    """Grow ``config.n_trees`` trees; tree ``t`` draws from ``default_rng(seed + t)``."""
    config = config or ForestConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int).reshape(-1)
    n, d = X.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if len(y) != n or len(w) != n:
        raise DimensionMismatchError("X, y and w must have the same number of rows")
    if n < 2 or np.unique(y).size < 2:
        raise SingleClassError("random forest needs both classes in the training data")
    k = config.features_per_split or max(1, math.ceil(math.sqrt(d)))
    k = min(k, d)

    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    prob = w / w.sum()
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(seed + t)
        if config.bootstrap:
            counts = np.bincount(rng.choice(n, size=n, p=prob), minlength=n).astype(float)
        else:
            counts = w.copy()
        w1 = np.bincount(inverse, weights=counts * y, minlength=len(uniq))
        w0 = np.bincount(inverse, weights=counts * (1 - y), minlength=len(uniq))
        keep = np.flatnonzero(w0 + w1 > 0)
        max_depth = -1 if config.max_depth is None else int(config.max_depth)
        arrays = _grow(uniq, w0, w1, keep.astype(np.int64), max_depth,
                       float(config.min_leaf_weight), int(k), int(rng.integers(2**31 - 1)))
        trees.append(Tree(*arrays))
    return ForestModel(tuple(trees), d, config.max_depth, config.min_leaf_weight, k, seed, config)
