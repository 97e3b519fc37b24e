import numpy as np
import pytest
from scipy import integrate, stats

from fairaudit import synth
from fairaudit.errors import ConfigError
from fairaudit.synth import SynthConfig


def cfg(**kw):
    base = dict(n_rows=1000, group_shares={"A": 0.5, "B": 0.5}, n_features=2)
    base.update(kw)
    return SynthConfig(**base)


def test_deterministic_and_seed_sensitive():
    a = synth.make_dataset(cfg(missing_rates=0.2, seed=3))
    b = synth.make_dataset(cfg(missing_rates=0.2, seed=3))
    c = synth.make_dataset(cfg(missing_rates=0.2, seed=4))
    assert a.identical(b)
    assert not a.identical(c)


def test_symmetric_config_has_no_label_gap():
    ds = synth.generate(cfg(n_rows=100_000, label_coefficients=[0.7, -0.3]))
    y, g = ds.labels, ds.groups
    assert abs(y[g == 0].mean() - y[g == 1].mean()) < 0.01


def test_published_shares_are_reproduced():
    shares = {"White": .6583, "Asian": .1113, "Black": .1021, "Hispanic": .0813, "MR": .0427}
    shares["MR"] = 1 - sum(v for k, v in shares.items() if k != "MR")
    ds = synth.generate(SynthConfig(n_rows=50_000, group_shares=shares, n_features=1))
    emp = np.bincount(ds.groups, minlength=5) / ds.n_rows
    assert np.abs(emp - np.array(list(shares.values()))).max() < 0.01


def test_label_gap_from_feature_shift_matches_integral():
    c = cfg(n_rows=50_000, n_features=1, group_mean_shift={"A": [1.0], "B": [-1.0]}, label_coefficients=[10.0])
    ds = synth.generate(c)

    def p_pos(mu):
        f = lambda z: synth.sigmoid(10 * (mu + z)) * stats.norm.pdf(z)
        return integrate.quad(f, -10, 10)[0]

    expected = p_pos(1.0) - p_pos(-1.0)
    gap = ds.labels[ds.groups == 0].mean() - ds.labels[ds.groups == 1].mean()
    assert expected > 0.5
    assert gap == pytest.approx(expected, abs=0.02)


def test_mcar_rate():
    ds = synth.make_dataset(cfg(n_rows=10_000, missing_rates=0.2))
    frac = ds.mask[:, :2].mean(axis=0)
    assert np.all(np.abs(frac - 0.2) < 0.02)
    assert not ds.mask[:, 2:].any()


def test_mar_on_group():
    c = cfg(n_rows=10_000, missing_rates=0.1, missing_mechanism="MAR", mar_rate_multiplier={"A": 2.0, "B": 1.0})
    ds = synth.make_dataset(c)
    fa = ds.mask[ds.groups == 0, :2].mean()
    fb = ds.mask[ds.groups == 1, :2].mean()
    assert abs(fa - 0.2) < 0.02 and abs(fb - 0.1) < 0.02


def test_zero_rate_is_identity():
    c = cfg()
    assert synth.inject_missing(synth.generate(c), c).identical(synth.generate(c))


def test_seed_preserves_moments():
    c1 = cfg(n_rows=20_000, group_mean_shift={"A": [0.5, 0.0], "B": [-0.5, 1.0]}, seed=1)
    c2 = cfg(n_rows=20_000, group_mean_shift={"A": [0.5, 0.0], "B": [-0.5, 1.0]}, seed=2)
    for c in (c1, c2):
        ds = synth.generate(c)
        for k, mu in enumerate([[0.5, 0.0], [-0.5, 1.0]]):
            rows = ds.X[ds.groups == k, :2]
            se = 1.0 / np.sqrt(rows.shape[0])
            assert np.all(np.abs(rows.mean(axis=0) - mu) < 3 * se + 1e-12)


@pytest.mark.parametrize("kw", [
    dict(group_shares={"A": 0.5, "B": 0.4}),
    dict(group_shares={"A": 1.0, "B": 0.0}),
    dict(missing_rates=1.0),
    dict(missing_rates=[0.1]),
    dict(missing_mechanism="MNAR"),
    dict(missing_rates=0.6, missing_mechanism="MAR", mar_rate_multiplier={"A": 2.0}),
    dict(n_rows=0),
    dict(label_group_offset={"C": 1.0}),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        cfg(**kw)


def test_els_like_preset():
    c = synth.els_like()
    assert c.n_rows == 5000 and c.n_features == 30
    shares = np.array(list(c.group_shares.values()))
    assert abs(shares.sum() - 1.0) <= 1e-12
    assert shares == pytest.approx([11.13, 10.21, 8.13, 4.27, 65.83] / np.float64(99.57))
    assert c.complete_case_fraction() == pytest.approx(np.prod(1 - np.array(list(synth.ELS_MISSING_PERCENT.values())) / 100))
    ds = synth.make_dataset(c)
    assert ds.n_features == 35
    rates = ds.mask[:, :26].mean(axis=0)
    target = np.array(list(synth.ELS_MISSING_PERCENT.values())) / 100
    assert np.all(np.abs(rates - target) < 4 * np.sqrt(target * (1 - target) / 5000) + 1e-9)
    with pytest.raises(ConfigError):
        synth.preset("nope")
    assert synth.preset("els-like", 100, seed=2).n_rows == 100


def test_config_dict_roundtrip():
    c = synth.els_like(200, seed=9)
    assert synth.make_dataset(SynthConfig.from_dict(c.to_dict())).identical(synth.make_dataset(c))
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({**c.to_dict(), "colour": 1})
