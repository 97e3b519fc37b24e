import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairaudit import models
from fairaudit.errors import ConfigError, DegenerateLabelsError
from fairaudit.models import ModelSpec


def blobs(rng, n=300, p=3, sep=2.0):
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, p)) + sep * y[:, None] * np.eye(p)[0]
    return X, y


def test_log_gradient_matches_finite_differences(rng):
    X = rng.normal(size=(50, 4))
    y = rng.integers(0, 2, 50).astype(float)
    for _ in range(5):
        w, b = rng.normal(size=4), rng.normal()
        _, gw, gb = models.log_loss(w, b, X, y, 0.1)
        h = 1e-5
        num = np.array([(models.log_loss(w + h * e, b, X, y, 0.1)[0] - models.log_loss(w - h * e, b, X, y, 0.1)[0]) / (2 * h)
                        for e in np.eye(4)])
        assert np.allclose(gw, num, rtol=1e-5, atol=1e-9)
        numb = (models.log_loss(w, b + h, X, y, 0.1)[0] - models.log_loss(w, b - h, X, y, 0.1)[0]) / (2 * h)
        assert gb == pytest.approx(numb, rel=1e-5, abs=1e-9)


def test_log_loss_decreases_and_fits(rng):
    X, y = blobs(rng)
    m = models.train(ModelSpec("Log"), X, y)
    assert all(a >= b - 1e-12 for a, b in zip(m.losses, m.losses[1:]))
    assert models.accuracy(y, m.predict(X)) > 0.8


def test_svc_fits(rng):
    X, y = blobs(rng)
    m = models.train(ModelSpec("SVC"), X, y)
    assert models.accuracy(y, m.predict(X)) > 0.8


def test_xor_depth_two():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=float)
    y = np.array([0, 1, 1, 0] * 5)
    tree = models.build_tree(X, y, max_depth=2, min_samples_leaf=1)
    assert np.array_equal(tree.predict(X), y)
    assert tree.depth == 2


def stump_oracle(X, y, min_leaf=1):
    """Exhaustive best single split on Gini: (gain, feature, threshold)."""
    n = len(y)
    g = lambda v: 0.0 if v.size == 0 else 1 - (v.mean() ** 2) - ((1 - v.mean()) ** 2)
    parent = g(y)
    best = None
    for f in range(X.shape[1]):
        vals = np.unique(X[:, f])
        for a, b in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (a + b)
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            gain = parent - (left.sum() * g(y[left]) + (~left).sum() * g(y[~left])) / n
            if best is None or gain > best[0] + 1e-12:
                best = (gain, f, thr)
    return best


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_best_split_matches_exhaustive(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, (n, p)).astype(float)
    y = rng.integers(0, 2, n)
    got = models.best_split(X, y, range(p))
    ref = stump_oracle(X, y)
    if ref is None:
        assert got is None
    else:
        assert got[0] == pytest.approx(ref[0], abs=1e-12)
        assert got[1:] == ref[1:]


def test_tree_respects_limits(rng):
    X, y = blobs(rng, 400, 4, 0.5)
    t = models.build_tree(X, y, max_depth=3, min_samples_leaf=20)
    assert t.depth <= 3
    leaves = t.apply(X)
    assert np.bincount(leaves)[np.unique(leaves)].min() >= 20


def test_forest_deterministic(rng):
    X, y = blobs(rng, 200, 4)
    spec = ModelSpec("RF", {"n_trees": 7, "max_depth": 4})
    a = models.train(spec, X, y, seed=1).predict(X)
    b = models.train(spec, X, y, seed=1).predict(X)
    assert np.array_equal(a, b)
    assert models.accuracy(y, a) > 0.8


def test_degenerate_labels():
    X = np.zeros((5, 2))
    with pytest.raises(DegenerateLabelsError):
        models.train(ModelSpec("Log"), X, np.ones(5))
    tree = models.train(ModelSpec("DT"), X, np.ones(5))
    assert tree.predict(X).tolist() == [1] * 5


def test_spec_validation():
    for kw in ({"kind": "Log", "epochs": 0}, {"kind": "SVC", "C": 0}, {"kind": "DT", "depth": 3},
               {"kind": "NN"}, {"kind": "RF", "max_features": 0}):
        with pytest.raises(ConfigError):
            ModelSpec.from_dict(kw)
    s = ModelSpec.from_dict({"kind": "DT", "max_depth": 3, "name": "stump3"})
    assert s.label == "stump3" and ModelSpec.from_dict(s.to_dict()) == s


def test_predict_input_checks(rng):
    X, y = blobs(rng)
    m = models.train(ModelSpec("Log"), X, y)
    with pytest.raises(ValueError):
        m.predict(X[:, :2])
    with pytest.raises(ValueError):
        models.train(ModelSpec("Log"), np.array([[np.nan], [1.0]]), np.array([0, 1]))
