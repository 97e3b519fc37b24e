"""Logistic regression, CART decision tree, random forest and linear SVC, in numpy.

All training is deterministic given ``(spec, X, y, seed)``. Linear models work
on features standardized with training statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateLabelsError

DEFAULTS = {
    "Log": {"learning_rate": 0.1, "epochs": 300, "l2": 1e-4},
    "DT": {"max_depth": 8, "min_samples_leaf": 5},
    "RF": {"n_trees": 100, "max_depth": 8, "min_samples_leaf": 5, "max_features": None, "bootstrap": True},
    "SVC": {"C": 1.0, "learning_rate": 0.01, "epochs": 300},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: dict = field(default_factory=dict)
    name: str = None

    def __post_init__(self):
        if self.kind not in DEFAULTS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {sorted(DEFAULTS)}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ConfigError(f"{self.kind}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.kind], **self.params}
        object.__setattr__(self, "params", merged)
        for key in ("epochs", "n_trees"):
            if key in merged and (int(merged[key]) != merged[key] or merged[key] < 1):
                raise ConfigError(f"{self.kind}: {key} must be a positive integer")
        if "max_depth" in merged and (int(merged["max_depth"]) != merged["max_depth"] or merged["max_depth"] < 0):
            raise ConfigError(f"{self.kind}: max_depth must be a non-negative integer")
        if "min_samples_leaf" in merged and merged["min_samples_leaf"] < 1:
            raise ConfigError(f"{self.kind}: min_samples_leaf must be >= 1")
        if merged.get("max_features") is not None and merged["max_features"] < 1:
            raise ConfigError(f"{self.kind}: max_features must be >= 1")
        if "learning_rate" in merged and not merged["learning_rate"] > 0:
            raise ConfigError(f"{self.kind}: learning_rate must be positive")
        if "l2" in merged and not merged["l2"] >= 0:
            raise ConfigError(f"{self.kind}: l2 must be non-negative")
        if "C" in merged and not merged["C"] > 0:
            raise ConfigError(f"{self.kind}: C must be positive")

    @property
    def label(self) -> str:
        return self.name or self.kind

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        kind = d.pop("kind", None)
        name = d.pop("name", None)
        params = d.pop("params", {})
        params = {**params, **d}
        return cls(kind, params, name)

    def to_dict(self):
        out = {"kind": self.kind, **self.params}
        if self.name:
            out["name"] = self.name
        return out


def _check_X(X, n_features=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


class Standardizer:
    def __init__(self, X):
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)

    def __call__(self, X):
        return (X - self.mean) / self.scale


# --- logistic regression ---------------------------------------------------

def log_loss(w, b, X, y, l2):
    """Mean cross-entropy plus ``l2/2 * |w|^2``, and its gradient ``(dw, db)``."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w)
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    r = (p - y) / len(y)
    return loss, X.T @ r + l2 * w, r.sum()


class LogisticModel:
    kind = "Log"

    def __init__(self, std, w, b, losses=()):
        self.std = std
        self.w = w
        self.b = b
        self.losses = tuple(losses)

    @property
    def n_features(self):
        return self.w.shape[0]

    def predict_proba(self, X):
        z = self.std(_check_X(X, self.n_features)) @ self.w + self.b
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def to_dict(self):
        return {"kind": self.kind, "w": self.w.tolist(), "b": float(self.b),
                "mean": self.std.mean.tolist(), "scale": self.std.scale.tolist()}


def _train_log(params, X, y):
    std = Standardizer(X)
    Z = std(X)
    w = np.zeros(X.shape[1])
    b = 0.0
    lr, l2 = params["learning_rate"], params["l2"]
    losses = []
    for _ in range(int(params["epochs"])):
        loss, gw, gb = log_loss(w, b, Z, y, l2)
        losses.append(loss)
        w = w - lr * gw
        b = b - lr * gb
    losses.append(log_loss(w, b, Z, y, l2)[0])
    return LogisticModel(std, w, b, losses)


# --- linear SVC ------------------------------------------------------------

def hinge_objective(w, b, X, y_pm, C):
    """Mean hinge loss plus ``|w|^2 / (2C)`` and a subgradient."""
    margin = y_pm * (X @ w + b)
    active = margin < 1
    loss = np.mean(np.maximum(0.0, 1.0 - margin)) + (w @ w) / (2.0 * C)
    n = len(y_pm)
    gw = -(X[active].T @ y_pm[active]) / n + w / C
    gb = -y_pm[active].sum() / n
    return loss, gw, gb


class LinearSVCModel:
    kind = "SVC"

    def __init__(self, std, w, b):
        self.std = std
        self.w = w
        self.b = b

    @property
    def n_features(self):
        return self.w.shape[0]

    def decision_function(self, X):
        return self.std(_check_X(X, self.n_features)) @ self.w + self.b

    def predict(self, X):
        return (self.decision_function(X) >= 0).astype(np.int8)

    def to_dict(self):
        return {"kind": self.kind, "w": self.w.tolist(), "b": float(self.b),
                "mean": self.std.mean.tolist(), "scale": self.std.scale.tolist()}


def _train_svc(params, X, y):
    std = Standardizer(X)
    Z = std(X)
    y_pm = 2.0 * y - 1.0
    w = np.zeros(X.shape[1])
    b = 0.0
    lr, C = params["learning_rate"], params["C"]
    for _ in range(int(params["epochs"])):
        _, gw, gb = hinge_objective(w, b, Z, y_pm, C)
        w = w - lr * gw
        b = b - lr * gb
    return LinearSVCModel(std, w, b)


# --- CART ------------------------------------------------------------------

_GAIN_TOL = 1e-12


def gini(pos: float, n: float) -> float:
    if n == 0:
        return 0.0
    p = pos / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def best_split(X, y, features, min_samples_leaf=1):
    """Best Gini split of ``(X, y)`` over ``features``.

    Returns ``(gain, feature, threshold)`` or ``None`` when no split leaves
    ``min_samples_leaf`` rows on both sides. Thresholds are midpoints between
    consecutive distinct values; rows with ``x <= threshold`` go left. Gains
    within 1e-12 count as ties, resolved by lower feature index, then lower
    threshold.
    """
    n = y.shape[0]
    total_pos = float(y.sum())
    parent = gini(total_pos, n)
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cum = np.cumsum(y[order], dtype=np.float64)
        i = np.arange(1, n)  # rows [0, i) go left
        ok = (xs[1:] > xs[:-1]) & (i >= min_samples_leaf) & (n - i >= min_samples_leaf)
        if not ok.any():
            continue
        i = i[ok]
        nl = i.astype(np.float64)
        nr = n - nl
        pl = cum[i - 1]
        pr = total_pos - pl
        # n_side * gini(side) = n_side - (pos^2 + neg^2) / n_side
        child = (nl - (pl * pl + (nl - pl) ** 2) / nl) + (nr - (pr * pr + (nr - pr) ** 2) / nr)
        gain = parent - child / n
        k = int(np.flatnonzero(gain >= gain.max() - _GAIN_TOL)[0])
        g = float(gain[k])
        if best is None or g > best[0] + _GAIN_TOL:
            lo, hi = xs[i[k] - 1], xs[i[k]]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (g, int(f), float(thr))
    return best


class TreeModel:
    """Binary tree stored as parallel node arrays; ``feature == -1`` marks a leaf."""

    kind = "DT"

    def __init__(self, feature, threshold, left, right, value, n_features):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.int8)
        self.n_features = n_features

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    @property
    def depth(self):
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for k in range(self.n_nodes):
            if self.feature[k] >= 0:
                depth[self.left[k]] = depth[self.right[k]] = depth[k] + 1
        return int(depth.max())

    def apply(self, X):
        X = _check_X(X, self.n_features)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r = rows[inner]
            go_left = X[r, f[inner]] <= self.threshold[node[inner]]
            node[r] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {"kind": self.kind, "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist()}


def build_tree(X, y, max_depth=8, min_samples_leaf=1, max_features=None, rng=None) -> TreeModel:
    """Greedy CART on Gini impurity.

    A node splits while it is impure, shallower than ``max_depth`` and some
    split respects ``min_samples_leaf``; zero-gain splits are allowed. Leaves
    predict the majority label, ties to 0. With ``max_features < p`` each
    split considers a uniform random subset of features.
    """
    n, p = X.shape
    y = np.asarray(y, dtype=np.int8)
    k = p if max_features is None else min(int(max_features), p)
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        pos = int(y[rows].sum())
        value.append(1 if 2 * pos > rows.size else 0)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        pos = int(y[rows].sum())
        if depth >= max_depth or pos == 0 or pos == rows.size or rows.size < 2 * min_samples_leaf:
            continue
        if k < p:
            feats = np.sort(rng.choice(p, size=k, replace=False))
        else:
            feats = range(p)
        split = best_split(X[rows], y[rows], feats, min_samples_leaf)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(lrows)
        right[node] = new_node(rrows)
        stack.append((right[node], rrows, depth + 1))
        stack.append((left[node], lrows, depth + 1))
    return TreeModel(feature, threshold, left, right, value, p)


class ForestModel:
    kind = "RF"

    def __init__(self, trees, n_features):
        self.trees = list(trees)
        self.n_features = n_features

    def predict(self, X):
        X = _check_X(X, self.n_features)
        votes = np.zeros(X.shape[0], dtype=np.int64)
        for t in self.trees:
            votes += t.predict(X)
        return (2 * votes > len(self.trees)).astype(np.int8)

    def to_dict(self):
        return {"kind": self.kind, "trees": [t.to_dict() for t in self.trees]}


def _tree_rng(seed, t):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(t)]))


def _train_rf(params, X, y, seed):
    n, p = X.shape
    mf = params["max_features"]
    if mf is None:
        mf = max(1, int(round(math.sqrt(p))))
    trees = []
    for t in range(int(params["n_trees"])):
        rng = _tree_rng(seed, t)
        rows = rng.integers(0, n, size=n) if params["bootstrap"] else np.arange(n)
        trees.append(build_tree(X[rows], y[rows], params["max_depth"], params["min_samples_leaf"], mf, rng))
    return ForestModel(trees, p)


def train(spec: ModelSpec, X, y, seed: int = 0):
    """Fit the model described by ``spec`` on complete features ``X`` and 0/1 labels ``y``."""
    X = _check_X(X)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError("labels length does not match feature rows")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    y = y.astype(np.float64) if spec.kind in ("Log", "SVC") else y.astype(np.int8)
    if spec.kind in ("Log", "SVC") and np.unique(y).size < 2:
        raise DegenerateLabelsError(f"{spec.kind} needs both classes in the training labels")
    params = spec.params
    if spec.kind == "Log":
        return _train_log(params, X, y)
    if spec.kind == "SVC":
        return _train_svc(params, X, y)
    if spec.kind == "DT":
        return build_tree(X, y, params["max_depth"], params["min_samples_leaf"])
    return _train_rf(params, X, y, seed)


def predict(model, X) -> np.ndarray:
    return model.predict(X)


def accuracy(y, yhat) -> float:
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape:
        raise ValueError("y and yhat differ in length")
    if y.size == 0:
        raise ValueError("accuracy of an empty vector")
    return int((y == yhat).sum()) / y.size
