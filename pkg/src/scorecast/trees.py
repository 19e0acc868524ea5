"""Regression trees and ensembles grown by variance reduction.

A split's quality is the decrease in summed squared error around the
node means.  Two threshold policies exist:

  * "exhaustive": try every midpoint between consecutive distinct sorted
    values of each candidate feature (classic CART; used by the random
    forest on a per-split feature subset and by boosting on all features)
  * "random": one uniform threshold per candidate feature between that
    feature's node minimum and maximum (extremely randomized trees)

Trees are stored as flat parallel arrays so they serialize directly and
predict without recursion.  feature[i] == -1 marks node i as a leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError

SPLIT_POLICIES = ("exhaustive", "random")


@dataclass
class Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        feature = np.asarray(self.feature, dtype=np.intp)
        threshold = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.intp)
        right = np.asarray(self.right, dtype=np.intp)
        value = np.asarray(self.value, dtype=np.float64)
        nodes = np.zeros(x.shape[0], dtype=np.intp)
        while True:
            internal = feature[nodes] >= 0
            if not internal.any():
                break
            idx = np.flatnonzero(internal)
            node_ids = nodes[idx]
            go_left = x[idx, feature[node_ids]] <= threshold[node_ids]
            nodes[idx] = np.where(go_left, left[node_ids], right[node_ids])
        return value[nodes]

    def max_depth(self) -> int:
        depth = {0: 0}
        deepest = 0
        for i in range(self.n_nodes):
            d = depth[i]
            deepest = max(deepest, d)
            if self.feature[i] >= 0:
                depth[self.left[i]] = d + 1
                depth[self.right[i]] = d + 1
        return deepest

    def to_state(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": list(self.threshold),
            "left": list(self.left),
            "right": list(self.right),
            "value": list(self.value),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Tree":
        return cls(
            feature=[int(v) for v in state["feature"]],
            threshold=[float(v) for v in state["threshold"]],
            left=[int(v) for v in state["left"]],
            right=[int(v) for v in state["right"]],
            value=[float(v) for v in state["value"]],
        )


def _best_exhaustive_split(col: np.ndarray, y: np.ndarray, min_leaf: int):
    """Best (reduction, threshold) over midpoints of one feature column."""
    order = np.argsort(col, kind="stable")
    xs = col[order]
    ys = y[order]
    n = len(ys)
    boundaries = np.flatnonzero(xs[:-1] < xs[1:]) + 1  # left sizes at cuts
    if len(boundaries) == 0:
        return None
    boundaries = boundaries[(boundaries >= min_leaf) & (n - boundaries >= min_leaf)]
    if len(boundaries) == 0:
        return None
    csum = np.cumsum(ys)
    total = csum[-1]
    left_n = boundaries.astype(np.float64)
    left_sum = csum[boundaries - 1]
    # SSE decrease = sum_left^2/n_left + sum_right^2/n_right - sum^2/n
    reduction = (left_sum ** 2 / left_n
                 + (total - left_sum) ** 2 / (n - left_n)
                 - total ** 2 / n)
    best = int(np.argmax(reduction))
    cut = boundaries[best]
    thr = 0.5 * (xs[cut - 1] + xs[cut])
    return float(reduction[best]), float(thr)


def _random_split(col: np.ndarray, y: np.ndarray, min_leaf: int,
                  rng: np.random.Generator):
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        return None
    thr = rng.uniform(lo, hi)
    go_left = col <= thr
    n_left = int(go_left.sum())
    if n_left < min_leaf or len(y) - n_left < min_leaf:
        return None
    sl = float(y[go_left].sum())
    sr = float(y[~go_left].sum())
    reduction = sl * sl / n_left + sr * sr / (len(y) - n_left) - float(y.sum()) ** 2 / len(y)
    return reduction, thr


def fit_tree(x: np.ndarray, y: np.ndarray, max_depth: int = 10,
             min_leaf: int = 2, policy: str = "exhaustive",
             max_features: int | None = None,
             rng: np.random.Generator | None = None) -> Tree:
    """Grow one regression tree.  max_depth 0 yields a single mean leaf.

    max_features, when set, samples that many candidate features per
    split (the random forest recipe); None considers every feature.
    """
    if policy not in SPLIT_POLICIES:
        raise UsageError(f"unknown split policy {policy!r}; expected {SPLIT_POLICIES}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.shape[0]:
        raise UsageError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
    if x.shape[0] == 0:
        raise UsageError("cannot fit a tree on zero rows")
    if rng is None:
        rng = np.random.default_rng(0)
    n_features = x.shape[1]

    tree = Tree()

    def new_node() -> int:
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(0.0)
        return tree.n_nodes - 1

    def grow(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        sub_y = y[rows]
        tree.value[node] = float(sub_y.mean())
        if depth >= max_depth or len(rows) < 2 * min_leaf or np.all(sub_y == sub_y[0]):
            return node
        if max_features is not None and max_features < n_features:
            candidates = np.sort(rng.choice(n_features, size=max_features, replace=False))
        else:
            candidates = np.arange(n_features)
        best = None  # (reduction, feature, threshold)
        for j in candidates:
            col = x[rows, j]
            found = (_best_exhaustive_split(col, sub_y, min_leaf)
                     if policy == "exhaustive"
                     else _random_split(col, sub_y, min_leaf, rng))
            if found is None:
                continue
            reduction, thr = found
            if reduction > 1e-12 and (best is None or reduction > best[0]):
                best = (reduction, int(j), thr)
        if best is None:
            return node
        _, j, thr = best
        go_left = x[rows, j] <= thr
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = grow(rows[go_left], depth + 1)
        tree.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return tree


@dataclass
class Forest:
    """Mean of independently grown trees."""

    trees: list[Tree]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acc = np.zeros(x.shape[0])
        for tree in self.trees:
            acc += tree.predict(x)
        return acc / len(self.trees)

    def to_state(self) -> dict:
        return {"trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, state: dict) -> "Forest":
        return cls([Tree.from_state(s) for s in state["trees"]])


def fit_forest(x: np.ndarray, y: np.ndarray, n_trees: int = 100,
               max_depth: int = 10, min_leaf: int = 2,
               policy: str = "exhaustive", bootstrap: bool = True,
               max_features: int | None = None, seed: int = 0) -> Forest:
    """Grow n_trees trees on (optionally bootstrapped) rows.

    The random forest recipe is policy="exhaustive", bootstrap=True and
    max_features=ceil(d/3); extremely randomized trees use
    policy="random", bootstrap=False and all features.
    """
    if n_trees < 1:
        raise UsageError("n_trees must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    root = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        rng = np.random.default_rng(root.integers(0, 2 ** 63))
        if bootstrap:
            rows = rng.integers(0, x.shape[0], size=x.shape[0])
            xt, yt = x[rows], y[rows]
        else:
            xt, yt = x, y
        trees.append(fit_tree(xt, yt, max_depth=max_depth, min_leaf=min_leaf,
                              policy=policy, max_features=max_features, rng=rng))
    return Forest(trees)


def rf_max_features(n_features: int) -> int:
    return max(1, int(np.ceil(n_features / 3.0)))


@dataclass
class GradientBoostedTrees:
    """Stagewise sum F_m = F_{m-1} + learning_rate * tree_m on residuals."""

    init_value: float
    learning_rate: float
    trees: list[Tree]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        acc = np.full(x.shape[0], self.init_value)
        for tree in self.trees:
            acc += self.learning_rate * tree.predict(x)
        return acc

    def to_state(self) -> dict:
        return {
            "init_value": self.init_value,
            "learning_rate": self.learning_rate,
            "trees": [t.to_state() for t in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "GradientBoostedTrees":
        return cls(float(state["init_value"]), float(state["learning_rate"]),
                   [Tree.from_state(s) for s in state["trees"]])


def fit_gbt(x: np.ndarray, y: np.ndarray, n_stages: int = 100,
            learning_rate: float = 0.1, max_depth: int = 3,
            min_leaf: int = 2, seed: int = 0) -> GradientBoostedTrees:
    """Boost shallow exhaustive trees on squared-loss residuals.

    F_0 is the target mean; each stage fits the current residuals and is
    shrunk by learning_rate.
    """
    if n_stages < 0:
        raise UsageError("n_stages must be >= 0")
    if learning_rate < 0:
        raise UsageError("learning_rate must be >= 0")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    init = float(y.mean())
    current = np.full(y.shape[0], init)
    root = np.random.default_rng(seed)
    trees = []
    for _ in range(n_stages):
        rng = np.random.default_rng(root.integers(0, 2 ** 63))
        tree = fit_tree(x, y - current, max_depth=max_depth, min_leaf=min_leaf,
                        policy="exhaustive", rng=rng)
        current = current + learning_rate * tree.predict(x)
        trees.append(tree)
    return GradientBoostedTrees(init, learning_rate, trees)
