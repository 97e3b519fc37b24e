"""Config-driven audit: scenario x imputer x model x trial, aggregation and file output.

Trial seeds are a fixed function of the cell identity, never of the number of
trials or the execution schedule::

    blake2b(f"{master_seed}|{scenario}|{imputer}|{model}|{trial}", digest_size=8)

read as a big-endian unsigned 64-bit integer. Scenario stages draw their own
sub-seeds from it (see :func:`fairaudit.split.scenario_seeds`) and the model
uses ``derive(trial_seed, "model")``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import core, fairness, impute, models, split, synth
from .errors import ConfigError, FairAuditError, ParseError

log = logging.getLogger(__name__)

NO_IMPUTER = "none"
RECORD_FIELDS = (
    "scenario", "imputer", "model", "trial", "group", "metric",
    "value", "defined", "test_group_size", "predicted_positives",
)
SUMMARY_FIELDS = (
    "scenario", "imputer", "model", "group", "metric",
    "mean", "std", "n_defined", "n_undefined",
)


def derive(seed: int, name: str) -> int:
    h = hashlib.blake2b(f"{int(seed)}|{name}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def trial_seed(master_seed: int, scenario: str, imputer: str, model: str, trial: int) -> int:
    key = f"{int(master_seed)}|{scenario}|{imputer}|{model}|{int(trial)}"
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


# --- configuration -----------------------------------------------------------

@dataclass
class DataSource:
    """Either a CSV + schema pair or a synthetic config (inline or preset)."""

    csv: str = None
    schema: str = None
    synth: synth.SynthConfig = None
    drop_sparse_threshold: float = None
    include_sensitive_features: bool = True

    def __post_init__(self):
        if (self.synth is None) == (self.csv is None):
            raise ConfigError("data: give exactly one of 'csv' (with 'schema'), 'synth' or 'preset'")
        if self.csv is not None and self.schema is None:
            raise ConfigError("data: 'csv' needs a 'schema'")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        d = dict(d)
        known = {"csv", "schema", "synth", "preset", "n_rows", "seed", "overrides",
                 "drop_sparse_threshold", "include_sensitive_features"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"data: unknown keys {sorted(unknown)}")
        extra = {k: d.pop(k) for k in ("drop_sparse_threshold", "include_sensitive_features") if k in d}
        if "preset" in d:
            if "synth" in d or "csv" in d:
                raise ConfigError("data: 'preset' excludes 'synth' and 'csv'")
            cfg = synth.preset(d["preset"], d.get("n_rows"), d.get("seed", 0), **d.get("overrides", {}))
            return cls(synth=cfg, **extra)
        for k in ("n_rows", "seed", "overrides"):
            if k in d:
                raise ConfigError(f"data: {k!r} only applies with 'preset'")
        if "synth" in d:
            return cls(synth=synth.SynthConfig.from_dict(d["synth"]), **extra)

        def resolve(p):
            if p is None or base_dir is None or os.path.isabs(p):
                return p
            return str(Path(base_dir) / p)

        return cls(csv=resolve(d.get("csv")), schema=resolve(d.get("schema")), **extra)

    def to_dict(self):
        out = {}
        if self.synth is not None:
            out["synth"] = self.synth.to_dict()
        else:
            out["csv"] = self.csv
            out["schema"] = self.schema
        if self.drop_sparse_threshold is not None:
            out["drop_sparse_threshold"] = self.drop_sparse_threshold
        out["include_sensitive_features"] = self.include_sensitive_features
        return out

    def load(self) -> core.Dataset:
        if self.synth is not None:
            ds = synth.make_dataset(self.synth)
        else:
            ds, report = core.ingest_csv(self.csv, core.load_schema(self.schema))
            if report.n_rejected:
                log.info("ingest: %d of %d rows rejected", report.n_rejected, report.n_read)
        if self.drop_sparse_threshold is not None:
            ds, dropped = core.drop_sparse_rows(ds, self.drop_sparse_threshold)
            if dropped:
                log.info("dropped %d sparse rows", dropped)
        return ds


@dataclass
class AuditConfig:
    data: DataSource
    scenarios: list
    models: list
    imputers: list = field(default_factory=list)
    trials: int = 20
    master_seed: int = 0
    out_dir: str = "audit_out"
    workers: int = 1
    train_ratio: float = 0.8

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials}")
        if not self.scenarios:
            raise ConfigError("scenario list is empty")
        if not self.models:
            raise ConfigError("model list is empty")
        if any(s.imputed for s in self.scenarios) and not self.imputers:
            raise ConfigError("imputed scenarios need at least one imputer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError("train_ratio must lie in (0, 1)")
        for what, items in (("scenario", [s.label for s in self.scenarios]),
                            ("imputer", [i.label for i in self.imputers]),
                            ("model", [m.label for m in self.models])):
            if len(set(items)) != len(items):
                raise ConfigError(f"duplicate {what} labels {items}")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        d = dict(d)
        unknown = set(d) - {"data", "scenarios", "imputers", "models", "run"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")
        if "data" not in d:
            raise ConfigError("config has no 'data' section")
        run = dict(d.get("run", {}))
        bad = set(run) - {"trials", "master_seed", "out_dir", "workers", "train_ratio"}
        if bad:
            raise ConfigError(f"run: unknown keys {sorted(bad)}")
        return cls(
            data=DataSource.from_dict(d["data"], base_dir),
            scenarios=[split.ScenarioSpec.from_dict(s) for s in d.get("scenarios", [])],
            imputers=[impute.imputer_from_dict(i) for i in d.get("imputers", [])],
            models=[models.ModelSpec.from_dict(m) for m in d.get("models", [])],
            **run,
        )

    def to_dict(self):
        return {
            "data": self.data.to_dict(),
            "scenarios": [s.to_dict() for s in self.scenarios],
            "imputers": [impute.imputer_to_dict(i) for i in self.imputers],
            "models": [m.to_dict() for m in self.models],
            "run": {"trials": self.trials, "master_seed": self.master_seed, "out_dir": self.out_dir,
                    "workers": self.workers, "train_ratio": self.train_ratio},
        }

    def cells(self):
        """(scenario, imputer or None, model) in canonical order; RNA scenarios skip the imputer axis."""
        out = []
        for scn in self.scenarios:
            for imp in (self.imputers if scn.imputed else [None]):
                for m in self.models:
                    out.append((scn, imp, m))
        return out


def load_config(path) -> AuditConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return AuditConfig.from_dict(raw, base_dir=Path(path).resolve().parent)


# --- records -------------------------------------------------------------------

@dataclass(frozen=True)
class AuditRecord:
    scenario: str
    imputer: str
    model: str
    trial: int
    group: str
    metric: str
    value: float | None
    test_group_size: int
    predicted_positives: int

    @property
    def defined(self):
        return self.value is not None

    def row(self):
        v = "" if self.value is None else repr(float(self.value))
        return [self.scenario, self.imputer, self.model, str(self.trial), self.group, self.metric,
                v, str(int(self.defined)), str(self.test_group_size), str(self.predicted_positives)]


def _model_view(ds: core.Dataset, include_sensitive: bool) -> np.ndarray:
    if include_sensitive:
        return ds.X
    return ds.X[:, ~ds.sensitive_columns]


def evaluate(test: core.Dataset, yhat, train_groups=None, **ids) -> list:
    """Records for one fitted model on one test set: gaps, accuracies, counts."""
    y = test.labels
    names = test.group_names
    K = len(names)
    sizes = np.bincount(test.groups, minlength=K)
    pos = np.bincount(test.groups, weights=yhat, minlength=K).astype(np.int64)
    out = []
    report = fairness.one_vs_rest_report(y, yhat, test.groups, names)
    for r in report:
        k = names.index(r.group)
        out.append(AuditRecord(group=r.group, metric=r.metric, value=r.value,
                               test_group_size=int(sizes[k]), predicted_positives=int(pos[k]), **ids))
    conf = fairness.confusion_by_group(y, yhat, test.groups, K)
    for k, g in enumerate(names):
        out.append(AuditRecord(group=g, metric="accuracy", value=conf[k].accuracy,
                               test_group_size=int(sizes[k]), predicted_positives=int(pos[k]), **ids))
    out.append(AuditRecord(group="all", metric="accuracy", value=models.accuracy(y, yhat),
                           test_group_size=int(y.size), predicted_positives=int(pos.sum()), **ids))
    if train_groups is not None:
        n_train = np.bincount(train_groups, minlength=K)
        for k, g in enumerate(names):
            out.append(AuditRecord(group=g, metric="n_train", value=float(n_train[k]),
                                   test_group_size=int(sizes[k]), predicted_positives=int(pos[k]), **ids))
    return out


def run_cell(ds, scn, imp, model, trial, master_seed, train_ratio=0.8, include_sensitive=True) -> list:
    """All records of one (scenario, imputer, model, trial) cell; failures become an error record."""
    ids = dict(scenario=scn.label, imputer=imp.label if imp else NO_IMPUTER, model=model.label, trial=trial)
    seed = trial_seed(master_seed, ids["scenario"], ids["imputer"], ids["model"], trial)
    stage = "build"
    try:
        train, test = split.build_scenario(scn, ds, imp, seed, train_ratio)
        stage = "train"
        fitted = models.train(model, _model_view(train, include_sensitive), train.labels, derive(seed, "model"))
        stage = "predict"
        yhat = models.predict(fitted, _model_view(test, include_sensitive))
        stage = "evaluate"
        return evaluate(test, yhat, train.groups, **ids)
    except (FairAuditError, ValueError, np.linalg.LinAlgError) as exc:
        log.warning("cell %s/%s/%s trial %d failed at %s: %s", ids["scenario"], ids["imputer"],
                    ids["model"], trial, stage, exc)
        return [AuditRecord(group=stage, metric="error", value=None,
                            test_group_size=0, predicted_positives=0, **ids)]


def _run_chunk(args):
    ds, jobs, master_seed, train_ratio, include_sensitive = args
    return [run_cell(ds, s, i, m, t, master_seed, train_ratio, include_sensitive) for s, i, m, t in jobs]


def run_audit(cfg: AuditConfig, ds: core.Dataset = None, progress=None) -> list:
    """Run every cell for trials ``0..R-1`` and return records in canonical order.

    ``ds`` overrides ``cfg.data`` (useful when the caller already holds the data);
    ``progress(done, total, label)`` is called after every cell and trial.
    """
    if ds is None:
        ds = cfg.data.load()
    jobs = [(s, i, m, t) for s, i, m in cfg.cells() for t in range(int(cfg.trials))]
    inc = cfg.data.include_sensitive_features
    if cfg.workers == 1:
        results = []
        for n, (s, i, m, t) in enumerate(jobs, 1):
            results.append(run_cell(ds, s, i, m, t, cfg.master_seed, cfg.train_ratio, inc))
            if progress:
                progress(n, len(jobs), f"{s.label} {i.label if i else NO_IMPUTER} {m.label} trial {t}")
    else:
        # contiguous chunks, gathered back in submission order
        size = max(1, math.ceil(len(jobs) / (4 * cfg.workers)))
        chunks = [jobs[a:a + size] for a in range(0, len(jobs), size)]
        results = []
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_run_chunk, [(ds, c, cfg.master_seed, cfg.train_ratio, inc) for c in chunks]):
                results.extend(part)
                if progress:
                    progress(len(results), len(jobs), "chunk")
    return [r for cell in results for r in cell]


# --- aggregation -----------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    imputer: str
    model: str
    group: str
    metric: str
    mean: float | None
    std: float | None
    n_defined: int
    n_undefined: int

    def row(self):
        f = lambda v: "" if v is None else repr(float(v))
        return [self.scenario, self.imputer, self.model, self.group, self.metric,
                f(self.mean), f(self.std), str(self.n_defined), str(self.n_undefined)]

    def to_dict(self):
        return {k: getattr(self, k) for k in SUMMARY_FIELDS}


def summarize(records) -> list:
    """Mean and sample std (ddof 1; 0 for a single value) over defined values per cell."""
    cells = {}
    for r in records:
        key = (r.scenario, r.imputer, r.model, r.group, r.metric)
        cells.setdefault(key, []).append(r.value)
    out = []
    for key, values in cells.items():
        vals = np.array([v for v in values if v is not None], dtype=np.float64)
        n = vals.size
        if n == 0:
            mean = std = None
        else:
            mean = float(vals.mean())
            std = float(vals.std(ddof=1)) if n > 1 else 0.0
        out.append(SummaryRow(*key, mean, std, n, len(values) - n))
    return out


# --- emission ----------------------------------------------------------------------

def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def write_records(records, path):
    _write_csv(path, RECORD_FIELDS, (r.row() for r in records))


def plot_tables(summary) -> dict:
    """``{(metric, model): (header, rows)}``: one row per scenario[imputer], one column per group plus its std."""
    tables = {}
    for s in summary:
        if s.metric == "error":
            continue
        t = tables.setdefault((s.metric, s.model), {"groups": [], "rows": {}})
        if s.group not in t["groups"]:
            t["groups"].append(s.group)
        x = s.scenario if s.imputer == NO_IMPUTER else f"{s.scenario}[{s.imputer}]"
        t["rows"].setdefault(x, {})[s.group] = s
    out = {}
    f = lambda v: "" if v is None else repr(float(v))
    for key, t in tables.items():
        header = ["scenario"] + t["groups"] + [f"{g}_std" for g in t["groups"]]
        rows = []
        for x, cells in t["rows"].items():
            means = [f(cells[g].mean) if g in cells else "" for g in t["groups"]]
            stds = [f(cells[g].std) if g in cells else "" for g in t["groups"]]
            rows.append([x] + means + stds)
        out[key] = (header, rows)
    return out


def emit_summary(summary, out_dir):
    out_dir = Path(out_dir)
    _write_csv(out_dir / "summary.csv", SUMMARY_FIELDS, (s.row() for s in summary))
    try:
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump([s.to_dict() for s in summary], fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {out_dir / 'summary.json'}: {exc.strerror}") from exc
    plot_dir = out_dir / "plotdata"
    plot_dir.mkdir(exist_ok=True)
    for (metric, model), (header, rows) in plot_tables(summary).items():
        _write_csv(plot_dir / f"{_safe(metric)}__{_safe(model)}.csv", header, rows)


def emit(records, summary, out_dir):
    """Write records.csv, summary.csv, summary.json and plotdata/ under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_records(records, out_dir / "records.csv")
    emit_summary(summary, out_dir)


def read_records_csv(path) -> list:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != RECORD_FIELDS:
            raise ParseError(f"{path}: expected header {','.join(RECORD_FIELDS)}", row=1)
        for line, row in enumerate(reader, 2):
            if len(row) != len(RECORD_FIELDS):
                raise ParseError(f"{path}: expected {len(RECORD_FIELDS)} fields, got {len(row)}", row=line)
            d = dict(zip(RECORD_FIELDS, row))
            try:
                value = None if d["value"] == "" else float(d["value"])
                rec = AuditRecord(d["scenario"], d["imputer"], d["model"], int(d["trial"]), d["group"],
                                  d["metric"], value, int(d["test_group_size"]), int(d["predicted_positives"]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", row=line) from None
            if str(int(rec.defined)) != d["defined"]:
                raise ParseError(f"{path}: 'defined' flag disagrees with value", row=line, column="defined")
            records.append(rec)
    return records


def config_hash(cfg: AuditConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
