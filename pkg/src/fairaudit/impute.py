"""Simple, KNN and multiple (chained-equation) imputation.

Every imputer follows the same contract: ``fit`` learns frozen state from the
training rows only, ``transform`` fills any compatible dataset without touching
that state. Observed cells always pass through unchanged, and filled cells of
indicator columns are clamped to [0, 1] and thresholded at 0.5.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Dataset
from .errors import ConfigError, EmptyDatasetError, IncompatibleSchemaError, UnfittableColumnError
from .synth import stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimpleSpec:
    statistic: str = "mean"

    def __post_init__(self):
        if self.statistic not in ("mean", "median"):
            raise ConfigError(f"statistic must be 'mean' or 'median', got {self.statistic!r}")

    @property
    def label(self):
        return f"simple-{self.statistic}"


@dataclass(frozen=True)
class KNNSpec:
    k: int = 5

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k}")

    @property
    def label(self):
        return f"knn-k{self.k}"


@dataclass(frozen=True)
class MultipleSpec:
    m: int = 5
    iters: int = 10
    ridge: float = 1e-3

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ConfigError(f"m must be an integer >= 2, got {self.m}")
        if int(self.iters) != self.iters or self.iters < 1:
            raise ConfigError(f"iters must be a positive integer, got {self.iters}")
        if not self.ridge >= 0:
            raise ConfigError(f"ridge must be non-negative, got {self.ridge}")

    @property
    def label(self):
        return f"mi-m{self.m}"


ImputerSpec = Union[SimpleSpec, KNNSpec, MultipleSpec]

_KINDS = {"simple": SimpleSpec, "knn": KNNSpec, "multiple": MultipleSpec}


def imputer_from_dict(d) -> ImputerSpec:
    d = dict(d)
    kind = str(d.pop("kind", "")).lower()
    aliases = {"si": "simple", "mean": "simple", "knn-i": "knn", "mi": "multiple"}
    kind = aliases.get(kind, kind)
    if kind not in _KINDS:
        raise ConfigError(f"unknown imputer kind {kind!r}")
    try:
        return _KINDS[kind](**d)
    except TypeError as exc:
        raise ConfigError(f"imputer {kind}: {exc}") from None


def imputer_to_dict(spec: ImputerSpec) -> dict:
    kind = {SimpleSpec: "simple", KNNSpec: "knn", MultipleSpec: "multiple"}[type(spec)]
    out = {"kind": kind}
    out.update(spec.__dict__)
    return out


@dataclass(frozen=True)
class TransformReport:
    n_filled: int
    knn_fallbacks: int = 0
    knn_short: int = 0
    sweeps: int = 0


def _observed_means(ds: Dataset) -> np.ndarray:
    obs = ~ds.mask
    counts = obs.sum(axis=0)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise UnfittableColumnError(ds.feature_names[missing[0]])
    return np.where(obs, ds.X, 0.0).sum(axis=0) / counts


def _finish(ds: Dataset, filled: np.ndarray) -> Dataset:
    """Post-process filled cells and return a mask-free dataset."""
    out = np.array(ds.X, copy=True)
    mask = ds.mask
    binary = ds.binary_columns
    fix = mask & binary[None, :]
    vals = np.clip(filled, 0.0, 1.0)
    filled = np.where(fix, (vals >= 0.5).astype(np.float64), filled)
    out[mask] = filled[mask]
    return ds.replace(X=out, mask=np.zeros_like(mask))


class FittedImputer:
    """Frozen imputation state bound to the training columns."""

    spec: ImputerSpec

    def __init__(self, spec, feature_names):
        self.spec = spec
        self.feature_names = tuple(feature_names)

    def _check(self, ds: Dataset):
        if ds.feature_names != self.feature_names:
            raise IncompatibleSchemaError("dataset columns differ from the columns the imputer was fitted on")

    def transform(self, ds: Dataset, seed: int = 0) -> Dataset:
        return self.transform_with_report(ds, seed)[0]

    def transform_with_report(self, ds: Dataset, seed: int = 0):
        self._check(ds)
        if not ds.mask.any():
            return ds, TransformReport(0)
        filled, report = self._fill(ds, seed)
        return _finish(ds, filled), report


class FittedSimple(FittedImputer):
    def __init__(self, spec, feature_names, statistic):
        super().__init__(spec, feature_names)
        self.statistic = statistic
        self.statistic.flags.writeable = False

    def _fill(self, ds, seed):
        filled = np.broadcast_to(self.statistic, ds.X.shape)
        return filled, TransformReport(int(ds.mask.sum()))


class FittedKNN(FittedImputer):
    """Retains the training matrix; distances use only coordinates both rows observe.

    For rows ``a`` and ``b`` observing ``c`` common coordinates out of ``p``,
    the squared distance is ``p / c`` times the sum of squared differences over
    those coordinates. Neighbors for column ``j`` are drawn from training rows
    that observe ``j``; ties go to the lower training row index.
    """

    def __init__(self, spec, feature_names, X, observed, means):
        super().__init__(spec, feature_names)
        self.X = X
        self.observed = observed
        self.means = means
        for a in (self.X, self.observed, self.means):
            a.flags.writeable = False

    def distances(self, query: np.ndarray, query_observed: np.ndarray) -> np.ndarray:
        """Rescaled squared distances from one query row to every training row (inf if no overlap)."""
        p = self.X.shape[1]
        common = self.observed & query_observed[None, :]
        n_common = common.sum(axis=1)
        diff = np.where(common, self.X - np.where(query_observed, query, 0.0)[None, :], 0.0)
        d2 = (diff * diff).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n_common > 0, d2 * p / n_common, np.inf)

    def neighbors(self, query, query_observed, column) -> np.ndarray:
        """Indices of the (up to) k nearest usable training rows for ``column``, nearest first."""
        dist = self.distances(query, query_observed)
        usable = np.flatnonzero(self.observed[:, column] & np.isfinite(dist))
        order = np.lexsort((usable, dist[usable]))
        return usable[order[: self.spec.k]]

    def _fill(self, ds, seed):
        filled = np.array(ds.X, copy=True)
        fallbacks = short = 0
        for i in np.flatnonzero(ds.mask.any(axis=1)):
            q_obs = ~ds.mask[i]
            dist = self.distances(ds.X[i], q_obs)
            finite = np.isfinite(dist)
            for j in np.flatnonzero(ds.mask[i]):
                usable = np.flatnonzero(self.observed[:, j] & finite)
                if usable.size == 0:
                    filled[i, j] = self.means[j]
                    fallbacks += 1
                    continue
                if usable.size < self.spec.k:
                    short += 1
                order = np.lexsort((usable, dist[usable]))
                nn = usable[order[: self.spec.k]]
                filled[i, j] = self.X[nn, j].sum() / nn.size
        if fallbacks:
            log.info("knn: %d cells fell back to the training column mean", fallbacks)
        return filled, TransformReport(int(ds.mask.sum()), knn_fallbacks=fallbacks, knn_short=short)


def _ridge(A: np.ndarray, y: np.ndarray, ridge: float):
    """Ridge regression with an unpenalized intercept; returns (intercept, coef, residual std)."""
    a_mean = A.mean(axis=0)
    y_mean = y.mean()
    Ac = A - a_mean
    yc = y - y_mean
    gram = Ac.T @ Ac + ridge * np.eye(A.shape[1])
    coef = np.linalg.lstsq(gram, Ac.T @ yc, rcond=None)[0]
    intercept = y_mean - a_mean @ coef
    resid = yc - Ac @ coef
    dof = max(len(y) - 1, 1)
    return intercept, coef, float(np.sqrt(resid @ resid / dof))


class FittedMultiple(FittedImputer):
    """Per-column linear models from chained-equation sweeps on the training set.

    ``transform`` draws ``m`` stochastic completions (prediction plus Gaussian
    residual noise, iterated ``iters`` sweeps) and pools them by averaging each
    filled cell.
    """

    def __init__(self, spec, feature_names, means, intercepts, coefs, resid_std):
        super().__init__(spec, feature_names)
        self.means = means
        self.intercepts = intercepts
        self.coefs = coefs  # (p, p): row j holds weights over all columns, zero on the diagonal
        self.resid_std = resid_std
        for a in (self.means, self.intercepts, self.coefs, self.resid_std):
            a.flags.writeable = False

    def predict_column(self, X: np.ndarray, j: int) -> np.ndarray:
        return self.intercepts[j] + X @ self.coefs[j]

    def _fill(self, ds, seed):
        n, p = ds.X.shape
        mask = ds.mask
        cols = np.flatnonzero(mask.any(axis=0))
        total = np.zeros((n, p))
        for copy in range(self.spec.m):
            noise = stream(seed, copy).standard_normal((self.spec.iters, n, p))
            Xc = np.where(mask, self.means[None, :], ds.X)
            for sweep in range(self.spec.iters):
                for j in cols:
                    rows = mask[:, j]
                    pred = self.predict_column(Xc[rows], j)
                    Xc[rows, j] = pred + self.resid_std[j] * noise[sweep, rows, j]
            total += np.where(mask, Xc, 0.0)
        pooled = total / self.spec.m
        return pooled, TransformReport(int(mask.sum()), sweeps=self.spec.iters)


def _chained_fit(spec: MultipleSpec, train: Dataset, seed: int) -> FittedMultiple:
    X, mask = train.X, train.mask
    n, p = X.shape
    means = _observed_means(train)
    Xf = np.where(mask, means[None, :], X)
    rng = stream(seed, 0xC4A1)
    incomplete = np.flatnonzero(mask.any(axis=0))

    def fit_column(j):
        obs = ~mask[:, j]
        others = np.arange(p) != j
        b0, w, s = _ridge(Xf[obs][:, others], Xf[obs, j], spec.ridge)
        coef = np.zeros(p)
        coef[others] = w
        return b0, coef, s

    for _ in range(spec.iters):
        for j in incomplete:
            b0, coef, s = fit_column(j)
            rows = mask[:, j]
            Xf[rows, j] = b0 + Xf[rows] @ coef + s * rng.standard_normal(int(rows.sum()))

    intercepts = np.zeros(p)
    coefs = np.zeros((p, p))
    resid = np.zeros(p)
    for j in range(p):
        intercepts[j], coefs[j], resid[j] = fit_column(j)
    return FittedMultiple(spec, train.feature_names, means, intercepts, coefs, resid)


def fit(spec: ImputerSpec, train: Dataset, seed: int = 0) -> FittedImputer:
    """Learn imputation state from ``train``; ``seed`` drives the chained-equation noise."""
    if isinstance(spec, SimpleSpec):
        if spec.statistic == "mean":
            stat = _observed_means(train)
        else:
            _observed_means(train)
            stat = np.array([
                np.median(train.X[~train.mask[:, j], j]) for j in range(train.n_features)
            ])
        return FittedSimple(spec, train.feature_names, stat)
    if isinstance(spec, KNNSpec):
        means = _observed_means(train)
        return FittedKNN(
            spec, train.feature_names,
            np.where(train.mask, 0.0, train.X), ~train.mask, means,
        )
    if isinstance(spec, MultipleSpec):
        return _chained_fit(spec, train, seed)
    raise ConfigError(f"not an imputer spec: {spec!r}")


def transform(fitted: FittedImputer, ds: Dataset, seed: int = 0) -> Dataset:
    return fitted.transform(ds, seed)


def remove_na(ds: Dataset) -> Dataset:
    """Keep only complete-case rows (no masked feature cell), order preserved."""
    keep = ~ds.mask.any(axis=1)
    if keep.all():
        return ds
    if not keep.any():
        raise EmptyDatasetError("no complete-case rows remain after removing missing values")
    return ds.take(np.flatnonzero(keep))
