"""Synthetic tabular data with population bias, behavioral bias and missingness.

Groups are drawn from ``group_shares`` (population bias). Features are
``group_mean_shift[group] + noise_std * N(0, 1)`` (behavioral bias in the
attributes), and the label is ``Bernoulli(sigmoid(coef . x + group_offset))``
so outcomes can depend on the group beyond what the features carry.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import NUMERIC, SENSITIVE, Dataset
from .errors import ConfigError

MECHANISMS = ("MCAR", "MAR")


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the sub-stream ``keys`` of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _vector(value, n, what):
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = np.full(n, float(a))
    if a.shape != (n,):
        raise ConfigError(f"{what} must have length {n}, got shape {a.shape}")
    return a


@dataclass
class SynthConfig:
    n_rows: int
    group_shares: dict
    n_features: int
    group_mean_shift: dict = field(default_factory=dict)
    noise_std: object = 1.0
    label_coefficients: object = 0.0
    label_group_offset: dict = field(default_factory=dict)
    missing_rates: object = 0.0
    missing_mechanism: str = "MCAR"
    mar_rate_multiplier: dict = field(default_factory=dict)
    seed: int = 0
    feature_names: list = None
    sensitive_name: str = "race"
    response_name: str = "label"

    def __post_init__(self):
        self.validate()

    @property
    def groups(self) -> list:
        return list(self.group_shares)

    def validate(self):
        if int(self.n_rows) != self.n_rows or self.n_rows < 1:
            raise ConfigError(f"n_rows must be a positive integer, got {self.n_rows}")
        if int(self.n_features) != self.n_features or self.n_features < 0:
            raise ConfigError(f"n_features must be a non-negative integer, got {self.n_features}")
        if not self.group_shares:
            raise ConfigError("group_shares is empty")
        shares = np.array(list(self.group_shares.values()), dtype=np.float64)
        if (shares <= 0).any():
            raise ConfigError("group shares must be positive")
        if abs(shares.sum() - 1.0) > 1e-12:
            raise ConfigError(f"group shares sum to {shares.sum()!r}, not 1")
        unknown = (
            set(self.group_mean_shift) | set(self.label_group_offset) | set(self.mar_rate_multiplier)
        ) - set(self.group_shares)
        if unknown:
            raise ConfigError(f"per-group settings for undeclared groups {sorted(unknown)}")
        p = self.n_features
        for g, shift in self.group_mean_shift.items():
            _vector(shift, p, f"group_mean_shift[{g}]")
        if (_vector(self.noise_std, p, "noise_std") < 0).any():
            raise ConfigError("noise_std must be non-negative")
        _vector(self.label_coefficients, p, "label_coefficients")
        rates = _vector(self.missing_rates, p, "missing_rates")
        if ((rates < 0) | (rates >= 1)).any():
            raise ConfigError("missing rates must lie in [0, 1)")
        if self.missing_mechanism not in MECHANISMS:
            raise ConfigError(f"missing_mechanism must be one of {MECHANISMS}")
        for g, mult in self.mar_rate_multiplier.items():
            if mult <= 0:
                raise ConfigError(f"MAR multiplier for {g!r} must be positive")
        if self.missing_mechanism == "MAR":
            top = rates.max(initial=0.0) * max(self.mar_rate_multiplier.values(), default=1.0)
            if top >= 1:
                raise ConfigError(f"MAR multipliers push an effective missing rate to {top:.3f} >= 1")
        if self.feature_names is not None and len(self.feature_names) != p:
            raise ConfigError("feature_names length does not match n_features")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def names(self) -> list:
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{j}" for j in range(self.n_features)]

    def shift_matrix(self) -> np.ndarray:
        p = self.n_features
        return np.array([
            _vector(self.group_mean_shift.get(g, 0.0), p, "shift") for g in self.groups
        ]).reshape(len(self.groups), p)

    def effective_rates(self) -> np.ndarray:
        """(K, p) missing probability per group and feature."""
        rates = _vector(self.missing_rates, self.n_features, "missing_rates")
        if self.missing_mechanism == "MCAR":
            return np.tile(rates, (len(self.groups), 1))
        mult = np.array([self.mar_rate_multiplier.get(g, 1.0) for g in self.groups])
        return mult[:, None] * rates[None, :]

    def complete_case_fraction(self) -> float:
        """Expected share of rows with no missing feature under the configured mechanism."""
        shares = np.array(list(self.group_shares.values()))
        return float(shares @ np.prod(1.0 - self.effective_rates(), axis=1))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        allowed = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown synth config keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        out = dataclasses.asdict(self)
        for k, v in out.items():
            if isinstance(v, np.ndarray):
                out[k] = v.tolist()
        return out


def generate(cfg: SynthConfig) -> Dataset:
    """Draw a complete (no missing cells) dataset; a pure function of ``cfg``."""
    cfg.validate()
    n, p, K = cfg.n_rows, cfg.n_features, len(cfg.groups)
    shares = np.array(list(cfg.group_shares.values()), dtype=np.float64)
    groups = stream(cfg.seed, 0).choice(K, size=n, p=shares / shares.sum())
    noise = _vector(cfg.noise_std, p, "noise_std")
    Z = stream(cfg.seed, 1).standard_normal((n, p))
    X = cfg.shift_matrix()[groups] + Z * noise
    coef = _vector(cfg.label_coefficients, p, "label_coefficients")
    offset = np.array([float(cfg.label_group_offset.get(g, 0.0)) for g in cfg.groups])
    prob = sigmoid(X @ coef + offset[groups])
    labels = (stream(cfg.seed, 2).random(n) < prob).astype(np.int8)

    onehot = np.zeros((n, K))
    onehot[np.arange(n), groups] = 1.0
    return Dataset(
        feature_names=tuple(cfg.names()) + tuple(f"{cfg.sensitive_name}={g}" for g in cfg.groups),
        X=np.hstack([X, onehot]),
        mask=np.zeros((n, p + K), dtype=bool),
        groups=groups,
        group_names=tuple(cfg.groups),
        labels=labels,
        kinds=(NUMERIC,) * p + (SENSITIVE,) * K,
        sources=tuple(cfg.names()) + (cfg.sensitive_name,) * K,
        sensitive_name=cfg.sensitive_name,
        response_name=cfg.response_name,
    )


def inject_missing(ds: Dataset, cfg: SynthConfig) -> Dataset:
    """Mask the generated feature columns under MCAR or group-dependent MAR.

    Only the first ``cfg.n_features`` columns are eligible; sensitive indicators,
    groups and labels are never masked.
    """
    p = cfg.n_features
    if ds.mask[:, :p].any():
        raise ConfigError("inject_missing expects a dataset without masked feature cells")
    if [ds.group_names[k] for k in range(len(ds.group_names))] != cfg.groups:
        raise ConfigError("dataset groups do not match the config's groups")
    rates = cfg.effective_rates()
    if (rates >= 1).any():
        raise ConfigError("an effective missing rate reaches 1")
    if not rates.any():
        return ds
    u = stream(cfg.seed, 3).random((ds.n_rows, p))
    mask = ds.mask.copy()
    mask[:, :p] = u < rates[ds.groups]
    return ds.replace(X=ds.X, mask=mask)


def make_dataset(cfg: SynthConfig) -> Dataset:
    return inject_missing(generate(cfg), cfg)


# Race shares of the four-year-institution sample (percent of population);
# the published column sums to 99.57%, so shares are renormalized.
ELS_GROUP_PERCENT = {
    "Asian": 11.13,
    "Black": 10.21,
    "Hispanic": 8.13,
    "Multiracial": 4.27,
    "White": 65.83,
}

# Published per-variable missing percentages (nonzero entries).
ELS_MISSING_PERCENT = {
    "S-T relationship": 33.32,
    "F3-loan-owed": 25.33,
    "%white teacher": 23.69,
    "%Black teacher": 19.85,
    "%Hispanic teacher": 17.72,
    "TV/video(h/day)": 14.87,
    "Work(h/week)": 12.06,
    "F2_College entrance": 9.75,
    "Generation": 7.06,
    "F3_GPA(first attended)": 6.79,
    "F3_GPA(first year)": 6.78,
    "F1_TV/video(h/day)": 6.76,
    "F1_units in math": 6.13,
    "Athletic level": 5.39,
    "F1_frequency of computer use": 4.27,
    "Credits (total)": 4.04,
    "F1_Std Math": 3.64,
    "Credits (first year)": 3.48,
    "F3_GPA (all)": 3.33,
    "F3_Credits_Math": 3.01,
    "F3_Credits_Science": 2.90,
    "F1_Work(h/week)": 2.77,
    "Homework(h/week)": 1.85,
    "Number of school activities": 0.84,
    "English": 0.02,
    "Std Math/Reading": 0.02,
}

ELS_COMPLETE = ["Income", "Parents education", "High school attendance", "School Urbanicity"]


def _els_shares():
    total = sum(ELS_GROUP_PERCENT.values())
    names = list(ELS_GROUP_PERCENT)
    shares = {g: ELS_GROUP_PERCENT[g] / total for g in names[:-1]}
    shares[names[-1]] = 1.0 - sum(shares.values())  # exact sum for validation
    return shares


# Outcome-relevant variables and their label weights. The most often missing
# variable carries most of the signal, so mean filling leaves a third of the
# rows with little besides group membership to go on.
_ELS_WEIGHTS = {
    "S-T relationship": 4.0,
    "Income": 0.3,
    "Parents education": 0.3,
    "F1_Std Math": 0.3,
    "F3_GPA (all)": 0.3,
}

# Behavioral bias: per-group mean shifts on background and attainment variables.
_ELS_SHIFT_VARS = ("Income", "Parents education", "F1_Std Math")
_ELS_SHIFT = {"Asian": 0.2, "Black": -0.5, "Hispanic": -0.35, "Multiracial": -0.1, "White": 0.1}
_ELS_OFFSET = {"Asian": 2.2, "Black": -1.5, "Hispanic": -0.2, "Multiracial": 1.4, "White": 2.0}


def els_like(n_rows: int = 5000, seed: int = 0, **overrides) -> SynthConfig:
    """Synthetic stand-in shaped like the ELS:2002 four-year-college extract.

    Five race groups at the published population shares, 26 variables at the
    published missing percentages (MCAR) plus four complete background
    variables. Any :class:`SynthConfig` field may be overridden.
    """
    names = list(ELS_MISSING_PERCENT) + ELS_COMPLETE
    p = len(names)
    rates = [ELS_MISSING_PERCENT.get(v, 0.0) / 100.0 for v in names]
    coef = [_ELS_WEIGHTS.get(v, 0.0) for v in names]
    shift = {
        g: [s if v in _ELS_SHIFT_VARS else 0.0 for v in names] for g, s in _ELS_SHIFT.items()
    }
    d = dict(
        n_rows=n_rows,
        group_shares=_els_shares(),
        n_features=p,
        group_mean_shift=shift,
        noise_std=1.0,
        label_coefficients=coef,
        label_group_offset=dict(_ELS_OFFSET),
        missing_rates=rates,
        missing_mechanism="MCAR",
        seed=seed,
        feature_names=names,
    )
    unknown = set(overrides) - {f.name for f in dataclasses.fields(SynthConfig)}
    if unknown:
        raise ConfigError(f"unknown els-like overrides {sorted(unknown)}")
    d.update(overrides)
    return SynthConfig(**d)


PRESETS = {"els-like": els_like}


def preset(name: str, n_rows=None, seed: int = 0, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    if n_rows is not None:
        overrides["n_rows"] = n_rows
    return PRESETS[name](seed=seed, **overrides)
