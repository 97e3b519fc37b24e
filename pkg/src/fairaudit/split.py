"""Train/test construction for the evaluation scenarios, plus test-set perturbation."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import impute as _impute
from .core import NUMERIC, SENSITIVE, Dataset
from .errors import ConfigError, EmptyDatasetError

log = logging.getLogger(__name__)

SCENARIOS = (
    "RNA.rnd", "RNA.str", "Imp.rnd", "Imp.str", "Imp.prop",
    "Imp.prop.frac", "Imp.prop.frac.perturb", "RNA.rnd.perturb",
)
PERTURB_KINDS = ("Imp.prop.frac.perturb", "RNA.rnd.perturb")
PERTURB_TARGETS = ("race", "nonsensitive", "all", "none")


@dataclass(frozen=True)
class SplitPlan:
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train, dtype=np.int64)
        test = np.asarray(self.test, dtype=np.int64)
        if train.size == 0 or test.size == 0:
            raise EmptyDatasetError("split leaves an empty train or test set")
        if np.intersect1d(train, test).size:
            raise ValueError("train and test indices overlap")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    perturb_target: str = "none"
    test_fraction: float = 0.75
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.kind!r}; expected one of {SCENARIOS}")
        if self.perturb_target not in PERTURB_TARGETS:
            raise ConfigError(f"unknown perturb target {self.perturb_target!r}")
        if (self.kind in PERTURB_KINDS) == (self.perturb_target == "none"):
            raise ConfigError(
                f"scenario {self.kind}: perturb_target must be "
                + ("set" if self.kind in PERTURB_KINDS else "'none'")
            )
        if not 0.0 < self.test_fraction <= 1.0:
            raise ConfigError("test_fraction must lie in (0, 1]")
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale must be non-negative")

    @property
    def imputed(self) -> bool:
        return self.kind.startswith("Imp.")

    @property
    def label(self) -> str:
        if self.perturb_target == "none":
            return self.kind
        return f"{self.kind}-{self.perturb_target}"

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            kind, _, target = d.partition("-")
            return cls(kind, target or "none")
        d = dict(d)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"scenario: {exc}") from None

    def to_dict(self):
        return dict(self.__dict__)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _quotas(sizes, test_share: float, target: int | None) -> np.ndarray:
    """Per-stratum test counts: rounded shares, nudged by one row where needed to hit ``target``.

    Each quota stays at floor or ceil of the exact share, and strata of size one
    always keep their row in train.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    exact = test_share * sizes
    q = np.array([round_half_up(e) for e in exact], dtype=np.int64)
    q[sizes <= 1] = 0
    if target is None:
        return q
    lo = np.floor(exact).astype(np.int64)
    hi = np.where(sizes <= 1, 0, np.minimum(np.ceil(exact).astype(np.int64), sizes - 1))
    lo = np.minimum(lo, hi)
    q = np.clip(q, lo, hi)
    diff = target - int(q.sum())
    frac = exact - np.floor(exact)
    if diff > 0:
        cand = [k for k in np.argsort(-frac, kind="stable") if q[k] < hi[k]]
        for k in cand[:diff]:
            q[k] += 1
    elif diff < 0:
        cand = [k for k in np.argsort(frac, kind="stable") if q[k] > lo[k]]
        for k in cand[:-diff]:
            q[k] -= 1
    return q


def _train_size(n: int, train_ratio: float) -> int:
    return round_half_up(train_ratio * n)


def split_random(n: int, train_ratio: float = 0.8, seed=0) -> SplitPlan:
    if n < 5:
        raise EmptyDatasetError(f"need at least 5 rows to split, got {n}")
    if not 0.0 < train_ratio < 1.0:
        raise ConfigError("train_ratio must lie in (0, 1)")
    n_train = _train_size(n, train_ratio)
    perm = _rng(seed).permutation(n)
    return SplitPlan(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def _split_strata(keys: np.ndarray, train_ratio: float, seed) -> SplitPlan:
    if not 0.0 < train_ratio < 1.0:
        raise ConfigError("train_ratio must lie in (0, 1)")
    n = keys.shape[0]
    rng = _rng(seed)
    strata, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    members = [np.flatnonzero(inverse == s) for s in range(len(strata))]
    sizes = [m.size for m in members]
    singles = sum(s == 1 for s in sizes)
    if singles:
        log.info("%d single-row strata placed in train", singles)
    quotas = _quotas(sizes, 1.0 - train_ratio, n - _train_size(n, train_ratio))
    test = []
    for m, q in zip(members, quotas):
        if q:
            test.append(rng.choice(m, size=int(q), replace=False))
    test = np.sort(np.concatenate(test)) if test else np.array([], dtype=np.int64)
    train = np.setdiff1d(np.arange(n), test)
    return SplitPlan(train, test)


def split_stratified(groups, labels, train_ratio: float = 0.8, seed=0) -> SplitPlan:
    """Split so every (group, label) stratum sends ~(1 - train_ratio) of its rows to test."""
    keys = np.column_stack([np.asarray(groups), np.asarray(labels)])
    return _split_strata(keys, train_ratio, seed)


def split_proportional(groups, train_ratio: float = 0.8, seed=0) -> SplitPlan:
    """Split each group separately so train/test keep the group proportions."""
    return _split_strata(np.asarray(groups).reshape(-1, 1), train_ratio, seed)


def subsample_test(plan: SplitPlan, fraction: float = 0.75, seed=0) -> SplitPlan:
    if not 0.0 < fraction <= 1.0:
        raise ConfigError("fraction must lie in (0, 1]")
    if fraction == 1.0:
        return plan
    k = round_half_up(fraction * plan.test.size)
    if k == 0:
        raise EmptyDatasetError("subsampled test set is empty")
    keep = _rng(seed).choice(plan.test, size=k, replace=False)
    return SplitPlan(plan.train, np.sort(keep))


def perturb_race(test: Dataset, seed=0) -> Dataset:
    """Reassign every row's group uniformly over all groups and rewrite the group indicators."""
    K = len(test.group_names)
    if K < 2:
        return test
    groups = _rng(seed).integers(0, K, size=test.n_rows)
    X = np.array(test.X, copy=True)
    for code in range(K):
        j = test.group_column(code)
        if j is not None:
            X[:, j] = (groups == code).astype(np.float64)
    return test.replace(X=X, groups=groups)


def column_stds(ds: Dataset) -> np.ndarray:
    """Population std of each column over observed cells (0 when fewer than two)."""
    out = np.zeros(ds.n_features)
    for j in range(ds.n_features):
        v = ds.X[~ds.mask[:, j], j]
        if v.size > 1:
            out[j] = v.std()
    return out


def perturb_features(test: Dataset, train_column_stds, noise_scale: float = 1.0, seed=0) -> Dataset:
    """Add N(0, (noise_scale * train std)^2) to every non-sensitive feature cell.

    Indicator columns are re-thresholded at 0.5; sensitive indicators are untouched.
    """
    stds = np.asarray(train_column_stds, dtype=np.float64)
    if stds.shape != (test.n_features,):
        raise ConfigError("train_column_stds length does not match feature count")
    if noise_scale == 0:
        return test
    target = np.array([k != SENSITIVE for k in test.kinds]) & (stds > 0)
    noise = _rng(seed).standard_normal(test.X.shape) * (noise_scale * stds)[None, :]
    X = np.array(test.X, copy=True)
    noisy = X + noise
    binary = np.array([k != NUMERIC for k in test.kinds])
    noisy[:, binary] = (noisy[:, binary] >= 0.5).astype(np.float64)
    cells = target[None, :] & ~test.mask
    X[cells] = noisy[cells]
    return test.replace(X=X)


def _child(seed: int, name: str) -> int:
    h = hashlib.blake2b(f"{int(seed)}|{name}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def scenario_seeds(seed: int) -> dict:
    """Named sub-seeds used by :func:`build_scenario` for each stochastic stage."""
    names = ("split", "subsample", "impute_fit", "impute_train", "impute_test", "race", "features")
    return {n: _child(seed, n) for n in names}


def _perturb(test: Dataset, train: Dataset, scn: ScenarioSpec, seeds) -> Dataset:
    if scn.perturb_target in ("race", "all"):
        test = perturb_race(test, seeds["race"])
    if scn.perturb_target in ("nonsensitive", "all"):
        test = perturb_features(test, column_stds(train), scn.noise_scale, seeds["features"])
    return test


def build_scenario(scn: ScenarioSpec, ds: Dataset, imputer=None, seed: int = 0, train_ratio: float = 0.8):
    """Construct ``(train, test)`` for one scenario.

    RNA kinds drop incomplete rows before splitting; Imp kinds split first, fit
    the imputer on train only and apply it to both sides. Perturbations touch
    the test set only and run after imputation and subsampling.
    """
    seeds = scenario_seeds(seed)
    if scn.imputed and imputer is None:
        raise ConfigError(f"scenario {scn.kind} requires an imputer")
    if not scn.imputed and imputer is not None:
        raise ConfigError(f"scenario {scn.kind} takes no imputer")

    if not scn.imputed:
        data = _impute.remove_na(ds)
        if scn.kind == "RNA.str":
            plan = split_stratified(data.groups, data.labels, train_ratio, seeds["split"])
        else:
            plan = split_random(data.n_rows, train_ratio, seeds["split"])
        train, test = data.take(plan.train), data.take(plan.test)
        if scn.kind == "RNA.rnd.perturb":
            test = _perturb(test, train, scn, seeds)
        return train, test

    if scn.kind == "Imp.rnd":
        plan = split_random(ds.n_rows, train_ratio, seeds["split"])
    elif scn.kind == "Imp.str":
        plan = split_stratified(ds.groups, ds.labels, train_ratio, seeds["split"])
    else:
        plan = split_proportional(ds.groups, train_ratio, seeds["split"])
        if scn.kind != "Imp.prop":
            plan = subsample_test(plan, scn.test_fraction, seeds["subsample"])
    train_raw, test_raw = ds.take(plan.train), ds.take(plan.test)
    fitted = _impute.fit(imputer, train_raw, seeds["impute_fit"])
    train, rep_train = fitted.transform_with_report(train_raw, seeds["impute_train"])
    test, rep_test = fitted.transform_with_report(test_raw, seeds["impute_test"])
    log.debug("%s/%s imputation: train %s, test %s", scn.label, imputer.label, rep_train, rep_test)
    if scn.kind == "Imp.prop.frac.perturb":
        test = _perturb(test, train, scn, seeds)
    return train, test
