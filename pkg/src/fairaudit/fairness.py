"""Group fairness gaps, one group against the pooled rest.

All gaps are signed: ``rate(group) - rate(rest)``. A rate whose denominator is
empty is undefined, and any gap built on it is ``None`` (never silently 0).
Gaps are evaluated on exact count ratios and rounded to float once, so they
are the correctly rounded value of the true difference.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

NOTIONS = ("SP", "EoP", "PE", "EO-tpr", "EO-fpr", "EO-scalar", "ACC-gap")


@dataclass(frozen=True)
class Counts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other):
        return Counts(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    @property
    def positive_rate(self):
        return _ratio(self.tp + self.fp, self.n)

    @property
    def tpr(self):
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def fpr(self):
        return _ratio(self.fp, self.fp + self.tn)

    @property
    def accuracy(self):
        return _ratio(self.tp + self.tn, self.n)


def _ratio(a, b):
    return a / b if b else None


def _exact(a, b):
    return Fraction(a, b) if b else None


def _diff(a, b):
    if a is None or b is None:
        return None
    return float(a - b)


def _check(y, yhat, groups=None):
    y = np.asarray(y)
    yhat = np.asarray(yhat)
    if y.shape != yhat.shape or y.ndim != 1:
        raise ValueError("y and yhat must be 1-D and equally long")
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape != y.shape:
            raise ValueError("groups length differs from y")
    if y.size == 0:
        raise ValueError("empty input")
    if not (np.isin(y, (0, 1)).all() and np.isin(yhat, (0, 1)).all()):
        raise ValueError("y and yhat must be binary")
    return y, yhat, groups


def confusion_by_group(y, yhat, groups, n_groups=None) -> dict[int, Counts]:
    """Exact TP/FP/TN/FN counts for every group code ``0..n_groups-1``."""
    y, yhat, groups = _check(y, yhat, groups)
    groups = groups.astype(np.int64)
    K = int(groups.max()) + 1 if n_groups is None else int(n_groups)
    cell = groups * 4 + y.astype(np.int64) * 2 + yhat.astype(np.int64)
    c = np.bincount(cell, minlength=4 * K).reshape(K, 4)
    # columns: (y=0,yhat=0) tn, (0,1) fp, (1,0) fn, (1,1) tp
    return {k: Counts(tp=int(c[k, 3]), fp=int(c[k, 1]), tn=int(c[k, 0]), fn=int(c[k, 2])) for k in range(K)}


def _rates(c: Counts):
    return {
        "pos": _exact(c.tp + c.fp, c.n),
        "tpr": _exact(c.tp, c.tp + c.fn),
        "fpr": _exact(c.fp, c.fp + c.tn),
        "acc": _exact(c.tp + c.tn, c.n),
    }


def _split(y, yhat, groups, g):
    conf = confusion_by_group(y, yhat, groups, max(int(np.max(groups)), int(g)) + 1)
    inside = conf[g]
    rest = Counts(0, 0, 0, 0)
    for k, c in conf.items():
        if k != g:
            rest = rest + c
    return inside, rest


def statistical_parity(yhat, groups, g):
    yhat = np.asarray(yhat)
    return _gaps(*_split(yhat, yhat, groups, g))["SP"]


def equal_opportunity(y, yhat, groups, g):
    return _gaps(*_split(y, yhat, groups, g))["EoP"]


def predictive_equality(y, yhat, groups, g):
    return _gaps(*_split(y, yhat, groups, g))["PE"]


def equalized_odds(y, yhat, groups, g):
    """``(tpr_gap, fpr_gap, max(|tpr_gap|, |fpr_gap|))``; the scalar is None if either part is."""
    gaps = _gaps(*_split(y, yhat, groups, g))
    return gaps["EO-tpr"], gaps["EO-fpr"], gaps["EO-scalar"]


def _gaps(inside: Counts, rest: Counts) -> dict:
    a, b = _rates(inside), _rates(rest)
    tpr_gap = None if a["tpr"] is None or b["tpr"] is None else a["tpr"] - b["tpr"]
    fpr_gap = None if a["fpr"] is None or b["fpr"] is None else a["fpr"] - b["fpr"]
    scalar = None if tpr_gap is None or fpr_gap is None else float(max(abs(tpr_gap), abs(fpr_gap)))
    tpr_gap = None if tpr_gap is None else float(tpr_gap)
    fpr_gap = None if fpr_gap is None else float(fpr_gap)
    return {
        "SP": _diff(a["pos"], b["pos"]),
        "EoP": tpr_gap,
        "PE": fpr_gap,
        "EO-tpr": tpr_gap,
        "EO-fpr": fpr_gap,
        "EO-scalar": scalar,
        "ACC-gap": _diff(a["acc"], b["acc"]),
    }


@dataclass(frozen=True)
class ReportRow:
    group: str
    metric: str
    value: float | None

    @property
    def defined(self):
        return self.value is not None


class FairnessReport(list):
    """List of :class:`ReportRow`, groups in schema order and notions in ``NOTIONS`` order."""

    def value(self, group, metric):
        for r in self:
            if r.group == group and r.metric == metric:
                return r.value
        raise KeyError((group, metric))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "metric", "value", "defined"])
            for r in self:
                w.writerow([r.group, r.metric, "" if r.value is None else repr(r.value), int(r.defined)])


def one_vs_rest_report(y, yhat, groups, group_names=None) -> FairnessReport:
    y, yhat, groups = _check(y, yhat, groups)
    if group_names is None:
        group_names = [str(k) for k in range(int(groups.max()) + 1)]
    K = len(group_names)
    if K < 2:
        raise ValueError("one-vs-rest needs at least two groups")
    conf = confusion_by_group(y, yhat, groups, K)
    total = Counts(0, 0, 0, 0)
    for c in conf.values():
        total = total + c
    report = FairnessReport()
    for k, name in enumerate(group_names):
        inside = conf[k]
        rest = Counts(total.tp - inside.tp, total.fp - inside.fp, total.tn - inside.tn, total.fn - inside.fn)
        gaps = _gaps(inside, rest)
        report.extend(ReportRow(name, notion, gaps[notion]) for notion in NOTIONS)
    return report
