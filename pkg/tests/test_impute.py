import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairaudit import impute
from fairaudit.core import BINARY, NUMERIC
from fairaudit.errors import ConfigError, EmptyDatasetError, IncompatibleSchemaError, UnfittableColumnError
from fairaudit.impute import KNNSpec, MultipleSpec, SimpleSpec

from conftest import make_ds


def random_ds(rng, n, p, rate=0.2, integer=False, kinds=None):
    X = rng.integers(-5, 6, (n, p)).astype(float) if integer else rng.normal(size=(n, p))
    if kinds is not None:
        for j, k in enumerate(kinds):
            if k == BINARY:
                X[:, j] = rng.integers(0, 2, n)
    mask = rng.random((n, p)) < rate
    mask[0] = False  # every column keeps an observed cell
    return make_ds(X, rng.integers(0, 2, n), rng.integers(0, 2, n), mask=mask, kinds=kinds)


@pytest.mark.parametrize("spec", [SimpleSpec("mean"), SimpleSpec("median"), KNNSpec(3), MultipleSpec(m=3, iters=3)])
def test_no_masked_cells_and_observed_unchanged(spec, rng):
    train = random_ds(rng, 60, 4)
    test = random_ds(rng, 30, 4)
    out = impute.fit(spec, train, seed=1).transform(test, seed=2)
    assert not out.mask.any()
    assert np.isfinite(out.X).all()
    obs = ~test.mask
    assert np.array_equal(out.X[obs], test.X[obs])


def test_simple_mean_equals_training_means(rng):
    train = random_ds(rng, 80, 3)
    test = random_ds(rng, 40, 3)
    out = impute.fit(SimpleSpec(), train).transform(test)
    for j in range(3):
        mean = train.X[~train.mask[:, j], j].mean()
        assert np.allclose(out.X[test.mask[:, j], j], mean, rtol=0, atol=1e-12)


def test_median(rng):
    train = make_ds([[1.0], [2.0], [10.0], [0.0]], [0, 1, 0, 1], [0, 1, 0, 1], mask=[[0], [0], [0], [1]])
    out = impute.fit(SimpleSpec("median"), train).transform(train)
    assert out.X[3, 0] == 2.0


def test_binary_columns_thresholded(rng):
    X = np.array([[1.0, 1.0], [1.0, 1.0], [0.0, 0.0], [0.0, 1.0]])
    mask = np.array([[0, 0], [0, 0], [0, 0], [1, 1]], bool)
    ds = make_ds(X, [0, 1, 0, 1], [0, 1, 0, 1], mask=mask, kinds=[NUMERIC, BINARY])
    out = impute.fit(SimpleSpec(), ds).transform(ds)
    assert out.X[3, 0] == pytest.approx(2 / 3)
    assert out.X[3, 1] == 1.0   # mean 2/3 -> 1


def knn_oracle(train, query, q_obs, k):
    """Brute force: rescaled partial distances, ties by lower training index."""
    Xt, Ot = train.X, ~train.mask
    p = Xt.shape[1]
    out = {}
    for j in np.flatnonzero(~q_obs):
        cands = []
        for i in range(Xt.shape[0]):
            if not Ot[i, j]:
                continue
            common = [c for c in range(p) if Ot[i, c] and q_obs[c]]
            if not common:
                continue
            d = sum((Xt[i, c] - query[c]) ** 2 for c in common) * p / len(common)
            cands.append((d, i))
        if not cands:
            vals = Xt[Ot[:, j], j]
            out[j] = vals.sum() / vals.size
            continue
        cands.sort()
        nn = [i for _, i in cands[:k]]
        out[j] = sum(Xt[i, j] for i in nn) / len(nn)
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(1, 7), st.integers(0, 2**32 - 1))
def test_knn_matches_brute_force_integer(n, p, k, seed):
    rng = np.random.default_rng(seed)
    train = random_ds(rng, n, p, rate=0.3, integer=True)
    test = random_ds(rng, 10, p, rate=0.3, integer=True)
    out = impute.fit(KNNSpec(k), train).transform(test)
    for i in range(test.n_rows):
        q_obs = ~test.mask[i]
        for j, v in knn_oracle(train, np.where(q_obs, test.X[i], 0.0), q_obs, k).items():
            assert out.X[i, j] == v


def test_knn_ties_go_to_lower_index():
    train = make_ds([[0.0, 10.0], [0.0, 20.0], [0.0, 30.0]], [0, 1, 0], [0, 1, 0], with_dummies=False)
    test = make_ds([[0.0, 0.0]], [0], [0], mask=[[0, 1]], with_dummies=False)
    fitted = impute.fit(KNNSpec(2), train)
    assert fitted.transform(test).X[0, 1] == 15.0


def test_knn_distance_rescaling():
    fitted = impute.fit(KNNSpec(1), make_ds([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]], [0, 1], [0, 1]))
    q = np.array([0.0, 0.0, 0.0, 1.0, 0.0])
    d = fitted.distances(q, np.array([True, True, False, True, True]))
    # four common coordinates out of five
    assert d[0] == (1 + 4 + 0 + 0) * 5 / 4
    assert d[1] == (0 + 0 + 1 + 1) * 5 / 4


def test_mi_recovers_linear_slope():
    rng = np.random.default_rng(0)
    x = rng.normal(size=400)
    X = np.column_stack([x, 2 * x])
    mask = np.zeros_like(X, bool)
    mask[rng.choice(400, 80, replace=False), 1] = True
    ds = make_ds(X, rng.integers(0, 2, 400), rng.integers(0, 2, 400), mask=mask, with_dummies=False)
    fitted = impute.fit(MultipleSpec(m=5, iters=5, ridge=1e-6), ds, seed=3)
    assert fitted.coefs[1, 0] == pytest.approx(2.0, abs=1e-3)
    out = fitted.transform(ds, seed=4)
    assert np.allclose(out.X[mask[:, 1], 1], 2 * x[mask[:, 1]], atol=1e-3)


def test_mi_pooled_dispersion_shrinks_with_m():
    rng = np.random.default_rng(1)
    x = rng.normal(size=300)
    X = np.column_stack([x, 2 * x + 0.5 * rng.normal(size=300)])
    mask = np.zeros_like(X, bool)
    mask[:30, 1] = True
    ds = make_ds(X, rng.integers(0, 2, 300), rng.integers(0, 2, 300), mask=mask, with_dummies=False)
    spec = MultipleSpec(m=8, iters=3)
    fitted = impute.fit(spec, ds, seed=0)
    draws = np.array([fitted.transform(ds, seed=s).X[:30, 1] for s in range(100)])
    disp = draws.std(axis=0, ddof=1)
    assert np.all(disp <= 1.5 * fitted.resid_std[1] / np.sqrt(spec.m))


def test_fit_uses_train_only_and_is_frozen(rng):
    train = random_ds(rng, 50, 3)
    fitted = impute.fit(SimpleSpec(), train)
    before = fitted.statistic.copy()
    fitted.transform(random_ds(rng, 50, 3))
    assert np.array_equal(before, fitted.statistic)
    with pytest.raises(ValueError):
        fitted.statistic[0] = 1.0


def test_errors(rng):
    ds = make_ds([[1.0], [2.0]], [0, 1], [0, 1], mask=[[1], [1]])
    with pytest.raises(UnfittableColumnError):
        impute.fit(SimpleSpec(), ds)
    train = random_ds(rng, 20, 3)
    other = random_ds(rng, 20, 2)
    with pytest.raises(IncompatibleSchemaError):
        impute.fit(SimpleSpec(), train).transform(other)
    with pytest.raises(ConfigError):
        KNNSpec(0)
    with pytest.raises(ConfigError):
        MultipleSpec(m=1)
    with pytest.raises(ConfigError):
        impute.imputer_from_dict({"kind": "magic"})


def test_spec_dict_roundtrip():
    for spec in (SimpleSpec("median"), KNNSpec(7), MultipleSpec(4, 2, 0.1)):
        assert impute.imputer_from_dict(impute.imputer_to_dict(spec)) == spec


def test_remove_na(rng):
    ds = random_ds(rng, 30, 3, rate=0.2)
    out = impute.remove_na(ds)
    assert not out.mask.any()
    assert out.n_rows == int((~ds.mask.any(axis=1)).sum())
    with pytest.raises(EmptyDatasetError):
        impute.remove_na(make_ds([[1.0]], [0], [0], mask=[[1]]))


def test_mi_deterministic(rng):
    ds = random_ds(rng, 40, 3)
    a = impute.fit(MultipleSpec(m=2, iters=2), ds, seed=5).transform(ds, seed=6)
    b = impute.fit(MultipleSpec(m=2, iters=2), ds, seed=5).transform(ds, seed=6)
    assert a.identical(b)
