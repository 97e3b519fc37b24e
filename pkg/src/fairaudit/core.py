"""Dataset representation, schema-driven CSV ingestion and data preparation.

A :class:`Dataset` stores only model-ready numeric feature columns. Categorical
source columns are expanded into ``<column>=<category>`` indicator columns at
ingest time, the sensitive attribute is kept both as an integer group vector
and as indicator features, and the response is binarized.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ParseError, SchemaError

KINDS = ("numeric", "categorical", "binary")
ROLES = ("feature", "sensitive", "response", "drop")

# Per-feature-column kinds inside a Dataset.
NUMERIC, BINARY, SENSITIVE = "numeric", "binary", "sensitive"

MISSING_TOKEN = "-9"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str = "numeric"
    role: str = "feature"
    missing_codes: frozenset = frozenset()
    categories: tuple = ()
    favorable_values: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "missing_codes", frozenset(str(c) for c in self.missing_codes))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        object.__setattr__(self, "favorable_values", frozenset(str(v) for v in self.favorable_values))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown schema field(s) {sorted(unknown)} for column {d.get('name')!r}")
        if "name" not in d:
            raise ConfigError("schema entry without 'name'")
        return cls(
            name=str(d["name"]),
            kind=d.get("kind", "numeric"),
            role=d.get("role", "feature"),
            missing_codes=d.get("missing_codes") or (),
            categories=d.get("categories") or (),
            favorable_values=d.get("favorable_values") or (),
        )

    def to_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "role": self.role,
            "missing_codes": sorted(self.missing_codes),
            "categories": list(self.categories),
            "favorable_values": sorted(self.favorable_values),
        }


def validate_schema(schema: Sequence[ColumnSchema]) -> None:
    """Raise :class:`ConfigError` unless ``schema`` satisfies the column invariants."""
    names = [c.name for c in schema]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate column names in schema")
    for c in schema:
        if c.kind not in KINDS:
            raise ConfigError(f"column {c.name!r}: unknown kind {c.kind!r}")
        if c.role not in ROLES:
            raise ConfigError(f"column {c.name!r}: unknown role {c.role!r}")
        if bool(c.categories) != (c.kind == "categorical"):
            raise ConfigError(f"column {c.name!r}: categories must be given iff kind is categorical")
        if len(set(c.categories)) != len(c.categories):
            raise ConfigError(f"column {c.name!r}: duplicate categories")
        if bool(c.favorable_values) != (c.role == "response"):
            raise ConfigError(f"column {c.name!r}: favorable_values must be given iff role is response")
        if c.role == "sensitive" and c.kind != "categorical":
            raise ConfigError(f"sensitive column {c.name!r} must be categorical")
    for role in ("response", "sensitive"):
        n = sum(c.role == role for c in schema)
        if n != 1:
            raise ConfigError(f"schema needs exactly one {role} column, found {n}")


def load_schema(path) -> list[ColumnSchema]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ConfigError("schema file must hold a JSON array of column objects")
    schema = [ColumnSchema.from_dict(d) for d in raw]
    validate_schema(schema)
    return schema


def save_schema(schema: Sequence[ColumnSchema], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in schema], fh, indent=2)
        fh.write("\n")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable numeric table with a missingness mask, group codes and binary labels.

    ``X[i, j]`` is NaN wherever ``mask[i, j]`` is True; operations consult the mask,
    never the payload. ``kinds[j]`` is ``"numeric"``, ``"binary"`` (0/1 indicator,
    including dummies of categorical features) or ``"sensitive"`` (indicator of a
    sensitive-attribute group). ``sources[j]`` names the raw column a feature came from.
    """

    feature_names: tuple
    X: np.ndarray
    mask: np.ndarray
    groups: np.ndarray
    group_names: tuple
    labels: np.ndarray
    kinds: tuple = None
    sources: tuple = None
    sensitive_name: str = "race"
    response_name: str = "label"

    def __post_init__(self):
        names = tuple(self.feature_names)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1 and len(names) == 0:
            X = X.reshape(-1, 0)
        mask = np.asarray(self.mask, dtype=bool)
        groups = np.asarray(self.groups, dtype=np.int64)
        labels = np.asarray(self.labels, dtype=np.int8)
        n = groups.shape[0]
        if X.ndim != 2 or X.shape != (n, len(names)):
            raise ValueError(f"feature matrix shape {X.shape} does not match ({n}, {len(names)})")
        if mask.shape != X.shape:
            raise ValueError("mask shape does not match feature matrix")
        if labels.shape != (n,):
            raise ValueError("labels length does not match n_rows")
        if len(self.group_names) < 1:
            raise ValueError("at least one group name required")
        if n and (groups.min() < 0 or groups.max() >= len(self.group_names)):
            raise ValueError("group codes out of range")
        if n and not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        kinds = tuple(self.kinds) if self.kinds is not None else (NUMERIC,) * len(names)
        sources = tuple(self.sources) if self.sources is not None else names
        if len(kinds) != len(names) or len(sources) != len(names):
            raise ValueError("kinds/sources length does not match feature count")
        bad = set(kinds) - {NUMERIC, BINARY, SENSITIVE}
        if bad:
            raise ValueError(f"unknown feature kinds {bad}")
        X = np.where(mask, np.nan, X)
        if not np.isfinite(X[~mask]).all():
            raise ValueError("observed feature values must be finite")
        set_ = object.__setattr__
        set_(self, "feature_names", names)
        set_(self, "X", _frozen(X))
        set_(self, "mask", _frozen(mask))
        set_(self, "groups", _frozen(groups))
        set_(self, "labels", _frozen(labels))
        set_(self, "group_names", tuple(str(g) for g in self.group_names))
        set_(self, "kinds", kinds)
        set_(self, "sources", sources)

    @property
    def n_rows(self) -> int:
        return self.groups.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def binary_columns(self) -> np.ndarray:
        """Boolean vector: indicator columns that must stay in {0, 1}."""
        return np.array([k != NUMERIC for k in self.kinds], dtype=bool)

    @property
    def sensitive_columns(self) -> np.ndarray:
        return np.array([k == SENSITIVE for k in self.kinds], dtype=bool)

    def group_column(self, code: int) -> int | None:
        """Index of the indicator feature for group ``code``, if the dataset carries one."""
        name = f"{self.sensitive_name}={self.group_names[code]}"
        for j, (fname, kind) in enumerate(zip(self.feature_names, self.kinds)):
            if kind == SENSITIVE and fname == name:
                return j
        return None

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return dataclasses.replace(
            self, X=self.X[rows], mask=self.mask[rows],
            groups=self.groups[rows], labels=self.labels[rows],
        )

    def replace(self, **changes) -> "Dataset":
        return dataclasses.replace(self, **changes)

    def identical(self, other: "Dataset") -> bool:
        """Bit-for-bit equality including names, mask and payload."""
        return (
            self.feature_names == other.feature_names
            and self.group_names == other.group_names
            and self.kinds == other.kinds
            and self.sources == other.sources
            and self.sensitive_name == other.sensitive_name
            and self.response_name == other.response_name
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.X, other.X, equal_nan=True)
            and np.array_equal(self.groups, other.groups)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class IngestReport:
    n_read: int
    n_rejected: int
    rejected_rows: tuple = field(default=(), repr=False)


@dataclass(frozen=True)
class MissingProfile:
    column_names: tuple
    column_fraction: np.ndarray
    row_fraction: np.ndarray


def _parse_number(token, col, line):
    try:
        v = float(token)
    except ValueError:
        raise ParseError(f"non-numeric token {token!r}", row=line, column=col.name) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {token!r}", row=line, column=col.name)
    return v


def ingest_csv(path, schema: Sequence[ColumnSchema]) -> tuple[Dataset, IngestReport]:
    """Read ``path`` under ``schema``; return the dataset and an ingest report."""
    schema = list(schema)
    validate_schema(schema)
    by_name = {c.name: c for c in schema}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, header row required") from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in by_name]
        absent = [c.name for c in schema if c.name not in header]
        if unknown or absent or len(set(header)) != len(header):
            raise SchemaError(
                f"{path}: header does not match schema (unknown: {unknown}, missing: {absent})"
            )
        pos = {h: i for i, h in enumerate(header)}

        features = [c for c in schema if c.role == "feature"]
        sens = next(c for c in schema if c.role == "sensitive")
        resp = next(c for c in schema if c.role == "response")

        names, kinds, sources = [], [], []
        for c in features:
            if c.kind == "categorical":
                for cat in c.categories:
                    names.append(f"{c.name}={cat}")
                    kinds.append(BINARY)
                    sources.append(c.name)
            else:
                names.append(c.name)
                kinds.append(NUMERIC if c.kind == "numeric" else BINARY)
                sources.append(c.name)
        for cat in sens.categories:
            names.append(f"{sens.name}={cat}")
            kinds.append(SENSITIVE)
            sources.append(sens.name)

        rows_X, rows_M, rows_g, rows_y = [], [], [], []
        rejected = []
        n_read = 0
        for tokens in reader:
            line = reader.line_num
            if not tokens or (len(tokens) == 1 and tokens[0].strip() == ""):
                continue
            n_read += 1
            if len(tokens) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(tokens)}", row=line)
            tok = {name: tokens[i].strip() for name, i in pos.items()}

            s_tok = tok[sens.name]
            r_tok = tok[resp.name]
            s_missing = s_tok in sens.missing_codes
            r_missing = r_tok in resp.missing_codes
            if not s_missing and s_tok not in sens.categories:
                raise ParseError(f"unknown category {s_tok!r}", row=line, column=sens.name)
            if not r_missing:
                if resp.kind == "categorical":
                    if r_tok not in resp.categories:
                        raise ParseError(f"unknown category {r_tok!r}", row=line, column=resp.name)
                elif r_tok not in resp.favorable_values:
                    _parse_number(r_tok, resp, line)

            xs, ms = [], []
            for c in features:
                t = tok[c.name]
                missing = t in c.missing_codes
                if c.kind == "categorical":
                    if missing:
                        xs.extend([0.0] * len(c.categories))
                        ms.extend([True] * len(c.categories))
                    else:
                        if t not in c.categories:
                            raise ParseError(f"unknown category {t!r}", row=line, column=c.name)
                        xs.extend(1.0 if t == cat else 0.0 for cat in c.categories)
                        ms.extend([False] * len(c.categories))
                elif missing:
                    xs.append(0.0)
                    ms.append(True)
                else:
                    v = _parse_number(t, c, line)
                    if c.kind == "binary" and v not in (0.0, 1.0):
                        raise ParseError(f"binary column holds {t!r}", row=line, column=c.name)
                    xs.append(v)
                    ms.append(False)

            if s_missing or r_missing:
                rejected.append(line)
                continue
            code = sens.categories.index(s_tok)
            xs.extend(1.0 if k == code else 0.0 for k in range(len(sens.categories)))
            ms.extend([False] * len(sens.categories))
            rows_X.append(xs)
            rows_M.append(ms)
            rows_g.append(code)
            rows_y.append(1 if r_tok in resp.favorable_values else 0)

    if not rows_X:
        raise EmptyDatasetError(f"{path}: no rows survive ingestion ({len(rejected)} rejected)")
    ds = Dataset(
        feature_names=tuple(names),
        X=np.array(rows_X, dtype=np.float64).reshape(len(rows_X), len(names)),
        mask=np.array(rows_M, dtype=bool).reshape(len(rows_M), len(names)),
        groups=np.array(rows_g, dtype=np.int64),
        group_names=sens.categories,
        labels=np.array(rows_y, dtype=np.int8),
        kinds=tuple(kinds),
        sources=tuple(sources),
        sensitive_name=sens.name,
        response_name=resp.name,
    )
    return ds, IngestReport(n_read=n_read, n_rejected=len(rejected), rejected_rows=tuple(rejected))


def load_csv(path, schema: Sequence[ColumnSchema]) -> Dataset:
    return ingest_csv(path, schema)[0]


def dataset_schema(ds: Dataset, missing_token: str = MISSING_TOKEN) -> list[ColumnSchema]:
    """Schema under which :func:`save_csv` output reloads to ``ds``."""
    out = []
    seen = set()
    codes = frozenset({missing_token})
    for name, kind, src in zip(ds.feature_names, ds.kinds, ds.sources):
        if kind == SENSITIVE or src in seen:
            continue
        seen.add(src)
        if name == src:
            out.append(ColumnSchema(src, "numeric" if kind == NUMERIC else "binary", "feature", codes))
        else:
            cats = [n.split("=", 1)[1] for n, s in zip(ds.feature_names, ds.sources) if s == src]
            out.append(ColumnSchema(src, "categorical", "feature", codes, tuple(cats)))
    out.append(ColumnSchema(ds.sensitive_name, "categorical", "sensitive", codes, ds.group_names))
    out.append(ColumnSchema(ds.response_name, "binary", "response", codes, favorable_values={"1"}))
    return out


def save_csv(ds: Dataset, csv_path, schema_path=None, missing_token: str = MISSING_TOKEN) -> list[ColumnSchema]:
    """Write ``ds`` as a raw CSV (categoricals collapsed) plus an optional JSON schema.

    Values are written with ``repr`` so a reload reproduces the payload bit-for-bit.
    Every categorical block must hold exactly one active indicator on observed rows.
    """
    schema = dataset_schema(ds, missing_token)
    blocks = {}
    for j, (kind, src) in enumerate(zip(ds.kinds, ds.sources)):
        if kind != SENSITIVE:
            blocks.setdefault(src, []).append(j)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in schema])
        for i in range(ds.n_rows):
            row = []
            for c in schema[:-2]:
                cols = blocks[c.name]
                if ds.mask[i, cols].any():
                    row.append(missing_token)
                elif c.kind == "categorical":
                    hot = [k for k, j in enumerate(cols) if ds.X[i, j] == 1.0]
                    if len(hot) != 1:
                        raise ValueError(f"row {i}: categorical block {c.name!r} is not one-hot")
                    row.append(c.categories[hot[0]])
                elif c.kind == "binary":
                    row.append(str(int(ds.X[i, cols[0]])))
                else:
                    row.append(repr(float(ds.X[i, cols[0]])))
            row.append(ds.group_names[ds.groups[i]])
            row.append(str(int(ds.labels[i])))
            w.writerow(row)
    if schema_path is not None:
        save_schema(schema, schema_path)
    return schema


def _attribute_columns(ds: Dataset) -> np.ndarray:
    return ~ds.sensitive_columns


def row_missing_fraction(ds: Dataset) -> np.ndarray:
    """Fraction of masked feature cells per row, sensitive indicators excluded."""
    cols = _attribute_columns(ds)
    p = int(cols.sum())
    if p == 0:
        return np.zeros(ds.n_rows)
    return ds.mask[:, cols].sum(axis=1) / p


def drop_sparse_rows(ds: Dataset, threshold: float = 0.75) -> tuple[Dataset, int]:
    """Remove rows whose missing fraction is strictly above ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    cols = _attribute_columns(ds)
    p = int(cols.sum())
    counts = ds.mask[:, cols].sum(axis=1)
    # counts / p > threshold, compared exactly
    t = Fraction(threshold)
    keep = np.array([Fraction(int(c), p) <= t for c in counts], dtype=bool) if p else np.ones(ds.n_rows, bool)
    dropped = int((~keep).sum())
    if dropped == 0:
        return ds, 0
    if not keep.any():
        raise EmptyDatasetError("all rows exceed the sparse-row threshold")
    return ds.take(np.flatnonzero(keep)), dropped


def missing_profile(ds: Dataset) -> MissingProfile:
    n = ds.n_rows
    col = np.array([float(Fraction(int(c), n)) if n else 0.0 for c in ds.mask.sum(axis=0)])
    return MissingProfile(ds.feature_names, col, row_missing_fraction(ds))


def group_counts(ds: Dataset) -> dict[str, tuple[int, float]]:
    counts = np.bincount(ds.groups, minlength=len(ds.group_names))
    n = int(counts.sum())
    return {g: (int(c), int(c) / n if n else 0.0) for g, c in zip(ds.group_names, counts)}
