"""CART trees (Gini classification, squared-error regression), random forest
and gradient boosting on the logistic loss.

Split search sorts each candidate feature once per node and scores every
admissible cut with cumulative sums. A cut at sorted position ``i`` sends
samples with ``x <= threshold`` left, the threshold being the midpoint of the
two neighbouring distinct values. Ties in the criterion (within a relative
1e-12) go to the lowest feature index, then to the lowest threshold.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateTraining

TIE_RTOL = 1e-12


def _feature_subset(d: int, max_features, rng) -> np.ndarray:
    if max_features is None:
        return np.arange(d)
    m = max(1, int(np.sqrt(d))) if max_features == "sqrt" else min(int(max_features), d)
    if m >= d:
        return np.arange(d)
    return np.sort(rng.choice(d, size=m, replace=False))


def _scores(xs_sorted, ys_sorted, criterion, min_leaf):
    """Child impurity (times n) for every cut position; inf where inadmissible."""
    n = len(xs_sorted)
    pos = np.arange(1, n)                      # left = first pos samples
    valid = (pos >= min_leaf) & (n - pos >= min_leaf) & (xs_sorted[1:] > xs_sorted[:-1])
    out = np.full(n - 1, np.inf)
    if not valid.any():
        return out
    nl = pos.astype(float)
    nr = n - nl
    if criterion == "gini":
        c1 = np.cumsum(ys_sorted)[:-1].astype(float)
        t1 = float(ys_sorted.sum())
        c1r = t1 - c1
        child = 2.0 * (c1 * (nl - c1) / nl + c1r * (nr - c1r) / nr)
    else:
        s = np.cumsum(ys_sorted)[:-1]
        s2 = np.cumsum(ys_sorted ** 2)[:-1]
        ts, ts2 = ys_sorted.sum(), (ys_sorted ** 2).sum()
        child = (s2 - s * s / nl) + ((ts2 - s2) - (ts - s) ** 2 / nr)
    out[valid] = child[valid]
    return out


def impurity(y, criterion) -> float:
    """Node impurity times node size (Gini for 0/1 labels, else SSE)."""
    n = len(y)
    if n == 0:
        return 0.0
    if criterion == "gini":
        c1 = float(np.sum(y))
        return 2.0 * c1 * (n - c1) / n
    return float(np.sum((y - y.mean()) ** 2))


def best_split(X, y, idx, features, criterion, min_leaf):
    """Best (feature, threshold, child impurity) at a node, or None."""
    parent = impurity(y[idx], criterion)
    best = None
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_s, ys_s = xs[order], y[idx][order]
        sc = _scores(xs_s, ys_s, criterion, min_leaf)
        if not np.isfinite(sc).any():
            continue
        v = sc.min()
        tol = TIE_RTOL * max(1.0, abs(v))
        i = int(np.flatnonzero(sc <= v + tol)[0])
        if best is None or v < best[2] - TIE_RTOL * max(1.0, abs(best[2])):
            a, b = xs_s[i], xs_s[i + 1]
            thr = 0.5 * (a + b)
            if not a <= thr < b:
                thr = a
            best = (int(f), float(thr), float(v))
    if best is None or not best[2] < parent - TIE_RTOL * max(1.0, parent):
        return None
    return best


def build_tree(X, y, criterion="gini", max_depth=8, min_leaf=3, max_features=None, rng=None) -> dict:
    """Grow a tree; returns flat arrays (preorder node numbering).

    Leaves store the mean target (the cancer fraction for classification).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    feat, thr, left, right, value, count = [], [], [], [], [], []

    def new_node(idx):
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()) if len(idx) else 0.0)
        count.append(len(idx))
        return len(feat) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            continue
        ys = y[idx]
        if np.all(ys == ys[0]):
            continue
        features = _feature_subset(d, max_features, rng)
        split = best_split(X, y, idx, features, criterion, min_leaf)
        if split is None:
            continue
        f, t, _ = split
        go_left = X[idx, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feat[node], thr[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # push right first so the left subtree is numbered first (preorder)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return {
        "feature": np.array(feat, dtype=np.int64),
        "threshold": np.array(thr, dtype=float),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=float),
        "count": np.array(count, dtype=np.int64),
    }


def tree_values(tree: dict, X) -> np.ndarray:
    """Leaf value reached by each row."""
    node = np.zeros(len(X), dtype=np.int64)
    feat, thr = tree["feature"], tree["threshold"]
    left, right = tree["left"], tree["right"]
    active = feat[node] >= 0
    while active.any():
        a = np.flatnonzero(active)
        f = feat[node[a]]
        go_left = X[a, f] <= thr[node[a]]
        node[a] = np.where(go_left, left[node[a]], right[node[a]])
        active = feat[node] >= 0
    return tree["value"][node]


def tree_depth(tree: dict) -> int:
    depth = np.zeros(len(tree["feature"]), dtype=np.int64)
    for i in range(len(depth)):
        for c in (tree["left"][i], tree["right"][i]):
            if c >= 0:
                depth[c] = depth[i] + 1
    return int(depth.max())


def _tree_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


# --- decision tree -----------------------------------------------------------

def fit_decision_tree(X, y, p, seed) -> dict:
    tree = build_tree(X, y, "gini", int(p["max_depth"]), int(p["min_leaf"]), p["max_features"],
                      _tree_rng(seed, 0))
    return {"tree": tree}


def predict_decision_tree(params, X) -> np.ndarray:
    return (tree_values(params["tree"], X) > 0.5).astype(np.int64)


# --- random forest -----------------------------------------------------------

def fit_random_forest(X, y, p, seed) -> dict:
    n = len(X)
    trees = []
    for t in range(int(p["n_trees"])):
        rng = _tree_rng(seed, t)
        idx = rng.integers(0, n, size=n) if p["bootstrap"] else np.arange(n)
        trees.append(build_tree(X[idx], y[idx], "gini", int(p["max_depth"]), int(p["min_leaf"]),
                                p["max_features"], rng))
    return {"trees": trees}


def predict_random_forest(params, X) -> np.ndarray:
    votes = np.zeros(len(X))
    for tree in params["trees"]:
        votes += tree_values(tree, X) > 0.5
    # majority vote; an exact tie goes to healthy
    return (votes > 0.5 * len(params["trees"])).astype(np.int64)


# --- gradient boosting -------------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def fit_gradient_boosting(X, y, p, seed) -> dict:
    """Logistic-loss boosting with regression trees fit to ``y - sigmoid(F)``.

    Leaves hold the mean residual of their samples (a first-order step).
    """
    prior = y.mean()
    if prior in (0.0, 1.0):
        raise DegenerateTraining("gradient boosting needs both classes in the training set")
    F0 = float(np.log(prior / (1.0 - prior)))
    F = np.full(len(y), F0)
    lr = float(p["learning_rate"])
    trees = []
    for t in range(int(p["n_rounds"])):
        resid = y - _sigmoid(F)
        tree = build_tree(X, resid, "mse", int(p["max_depth"]), int(p["min_leaf"]), None, None)
        trees.append(tree)
        F += lr * tree_values(tree, X)
    return {"F0": F0, "learning_rate": lr, "trees": trees}


def decision_function_gb(params, X) -> np.ndarray:
    F = np.full(len(X), params["F0"])
    for tree in params["trees"]:
        F += params["learning_rate"] * tree_values(tree, X)
    return F


def predict_gradient_boosting(params, X) -> np.ndarray:
    return (decision_function_gb(params, X) > 0).astype(np.int64)
