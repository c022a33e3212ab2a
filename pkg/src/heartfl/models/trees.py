"""CART-style Gini decision trees and a bagged random forest.

A tree is a dict of parallel node arrays. ``feature[i] == -1`` marks a leaf;
``value[i]`` is the fraction of class-1 training rows that reached node ``i``.
Samples with ``x[feature] <= threshold`` go left.
"""
from __future__ import annotations

import math

import numpy as np

# Two candidate splits whose weighted impurities differ by less than this are tied.
_TIE_TOL = 1e-9


def _split_scores(xs, ys):
    """Weighted Gini (times node size) for each boundary of a sorted column."""
    n = len(ys)
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    ones_left = np.cumsum(ys)[:-1].astype(float)
    ones_right = ys.sum() - ones_left
    zeros_left = n_left - ones_left
    zeros_right = n_right - ones_right
    return (n_left - (ones_left ** 2 + zeros_left ** 2) / n_left
            + n_right - (ones_right ** 2 + zeros_right ** 2) / n_right)


def best_split(X, y, features):
    """Lowest-Gini split over ``features`` (scanned in ascending order).

    Ties go to the lower feature index, then the lower threshold. Returns
    ``None`` when every candidate feature is constant.
    """
    best = None
    for f in sorted(features):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        pos = np.flatnonzero(valid)
        g = _split_scores(xs, ys)[pos]
        k = int(np.flatnonzero(g <= g.min() + _TIE_TOL)[0])
        if best is None or g[k] < best[0] - _TIE_TOL:
            best = (g[k], f, 0.5 * (xs[pos[k]] + xs[pos[k] + 1]))
    return None if best is None else best[1:]


def build_tree(X, y, max_depth=None, max_features=None, rng=None):
    """Grow a tree greedily until nodes are pure, unsplittable, or at ``max_depth``.

    With ``max_features`` set, each node draws that many features at random and
    falls back to the rest only if none of the drawn ones can split.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    p = X.shape[1]
    feature, threshold, left, right, value, depth = [], [], [], [], [], []

    def new_node(rows, d):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[rows].mean()) if len(rows) else 0.0)
        depth.append(d)
        return len(feature) - 1

    root = new_node(np.arange(len(y)), 0)
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        d = depth[node]
        ys = y[rows]
        if len(rows) < 2 or ys.min() == ys.max():
            continue
        if max_depth is not None and d >= max_depth:
            continue
        Xn = X[rows]
        if max_features is None or max_features >= p:
            split = best_split(Xn, ys, range(p))
        else:
            drawn = rng.choice(p, size=max_features, replace=False)
            split = best_split(Xn, ys, drawn)
            if split is None:
                split = best_split(Xn, ys, np.setdiff1d(np.arange(p), drawn))
        if split is None:
            continue
        f, thr = split
        go_left = Xn[:, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node], threshold[node] = int(f), float(thr)
        left[node] = new_node(lrows, d + 1)
        right[node] = new_node(rrows, d + 1)
        # Right pushed first so the left subtree is expanded (and numbered) first.
        stack.append((right[node], rrows))
        stack.append((left[node], lrows))

    return {
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value),
        "depth": np.array(depth, dtype=np.int64),
    }


def tree_proba(tree, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    node = np.zeros(len(X), dtype=np.int64)
    feat = tree["feature"]
    while True:
        f = feat[node]
        live = np.flatnonzero(f >= 0)
        if not len(live):
            break
        nl = node[live]
        go_left = X[live, f[live]] <= tree["threshold"][nl]
        node[live] = np.where(go_left, tree["left"][nl], tree["right"][nl])
    return tree["value"][node]


def tree_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def build_forest(X, y, n_estimators=100, max_depth=None, seed=0):
    """Bootstrap-bagged trees with sqrt(p) features tried per split."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n, p = X.shape
    mtry = max(1, math.isqrt(p))
    trees, seeds = [], []
    for t in range(n_estimators):
        ss = tree_seed(seed, t)
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        trees.append(build_tree(X[boot], y[boot], max_depth, mtry, rng))
        seeds.append(ss.entropy)
    return {"trees": trees, "tree_seeds": seeds}


def forest_proba(forest, X) -> np.ndarray:
    """Average of the trees' class-1 fractions."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    total = np.zeros(len(X))
    for tree in forest["trees"]:
        total += tree_proba(tree, X)
    return total / len(forest["trees"])
