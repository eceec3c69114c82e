"""CART trees and bootstrap random forests (gini / variance-reduction splits)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, TrainingError
from .mlp import TrainConfig

LEAF = -1


@dataclass(frozen=True)
class Tree:
    """Flat array encoding of a binary tree; node 0 is the root.

    Internal nodes route ``x[feature] <= threshold`` to ``left``. Leaves have
    ``feature == -1`` and carry ``value``: a class-count histogram for
    classification or a one-element mean for regression.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_values)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r = rows[active]
            nd = node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node


@dataclass(frozen=True)
class RandomForest:
    trees: tuple
    task: str
    n_features: int
    n_classes: int  # 0 for regression
    seed: int

    @property
    def kind(self) -> str:
        return "forest"

    @property
    def input_dim(self) -> int:
        return self.n_features

    @property
    def output_dim(self) -> int:
        return self.n_classes if self.task == "classification" else 1

    def predict(self, x):
        return predict_forest(self, x)


def _best_split(Xn, stats, features, min_leaf):
    """Best (feature, threshold) by maximizing sum_k S_kl^2/n_l + S_kr^2/n_r.

    ``stats`` holds per-sample class indicators or targets, so the same score
    is gini for classification and variance reduction for regression. Ties go
    to the lowest feature index, then the lowest threshold.
    """
    n = Xn.shape[0]
    best = None
    best_score = -np.inf
    for f in features:
        col = Xn[:, f]
        order = np.argsort(col, kind="stable")
        vs = col[order]
        cum = np.cumsum(stats[order], axis=0)
        total = cum[-1]
        nl = np.arange(1, n)
        valid = (vs[:-1] < vs[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        left = cum[:-1]
        right = total - left
        score = (left ** 2).sum(axis=1) / nl + (right ** 2).sum(axis=1) / (n - nl)
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score = score[i]
            thr = 0.5 * (vs[i] + vs[i + 1])
            if not vs[i] <= thr < vs[i + 1]:
                thr = vs[i]
            best = (int(f), float(thr))
    return best, best_score


def _grow_tree(X, stats, task, n_classes, cfg, max_features, rng) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []
    d = X.shape[1]

    def leaf_value(idx):
        if task == "classification":
            return stats[idx].sum(axis=0)
        return np.array([stats[idx, 0].mean()])

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(None)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        value[node] = leaf_value(idx)
        n = len(idx)
        if cfg.max_depth is not None and depth >= cfg.max_depth:
            continue
        if n < max(2, 2 * cfg.min_leaf):
            continue
        s = stats[idx]
        if task == "classification" and np.count_nonzero(s.sum(axis=0)) <= 1:
            continue
        if task == "regression" and np.all(s[:, 0] == s[0, 0]):
            continue
        feats = np.sort(rng.choice(d, size=max_features, replace=False))
        split, _ = _best_split(X[idx], s, feats, max(1, cfg.min_leaf))
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        # push right first so the left subtree is numbered first
        stack.append((rnode, idx[~mask], depth + 1))
        stack.append((lnode, idx[mask], depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def fit_random_forest(data, cfg: TrainConfig | None = None) -> RandomForest:
    """Bootstrap-aggregated CART trees with sqrt(d) features tried per split."""
    cfg = cfg or TrainConfig()
    X = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.targets)
    n, d = X.shape
    if n == 0:
        raise TrainingError("cannot fit a forest on an empty dataset")
    if cfg.n_trees < 1:
        raise TrainingError("a forest needs at least one tree")
    task = data.task
    if task == "classification":
        n_classes = data.n_classes
        stats = np.zeros((n, n_classes))
        stats[np.arange(n), y.astype(int)] = 1.0
    else:
        n_classes = 0
        stats = y.astype(np.float64).reshape(-1, 1)
    max_features = cfg.max_features or max(1, int(np.sqrt(d)))
    max_features = min(max_features, d)

    rng = np.random.default_rng(cfg.seed)
    trees = []
    for _ in range(cfg.n_trees):
        if cfg.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        tree_rng = np.random.default_rng(int(rng.integers(2 ** 63 - 1)))
        trees.append(_grow_tree(X[rows], stats[rows], task, n_classes, cfg,
                                max_features, tree_rng))
    return RandomForest(tuple(trees), task, d, n_classes, cfg.seed)


def tree_outputs(forest: RandomForest, X: np.ndarray) -> np.ndarray:
    """Per-tree predictions, shape (n_trees, n_rows): class votes or regression values."""
    out = np.empty((len(forest.trees), X.shape[0]))
    for t, tree in enumerate(forest.trees):
        vals = tree.value[tree.apply(X)]
        if forest.task == "classification":
            out[t] = np.argmax(vals, axis=1)
        else:
            out[t] = vals[:, 0]
    return out


def predict_forest(forest: RandomForest, x) -> np.ndarray:
    """Vote fractions per class (classification) or mean tree output (regression)."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionError(
            f"forest expects {forest.n_features} features, got shape {np.shape(x)}")
    outs = tree_outputs(forest, X)
    if forest.task == "classification":
        votes = np.zeros((X.shape[0], forest.n_classes))
        for t in range(outs.shape[0]):
            votes[np.arange(X.shape[0]), outs[t].astype(int)] += 1.0
        result = votes / outs.shape[0]
    else:
        result = outs.mean(axis=0)[:, None]
    return result[0] if single else result
