"""Tabular datasets with a binary label and a binary protected attribute.

A :class:`TabularDataset` holds a numeric feature matrix whose columns are
described by :class:`ColumnSchema` entries. Categorical columns are stored as
integer category codes until :func:`encode_onehot` expands them; continuous
columns stay numeric until :func:`discretize` bins them.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DatasetError,
    MissingValueError,
    SplitError,
    UnknownColumnError,
    UnmappableValueError,
    UnseenCategoryError,
)

logger = logging.getLogger(__name__)

BINARY = "binary"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"
KINDS = (BINARY, CATEGORICAL, CONTINUOUS)

# Key in ``value_map`` matching any raw value not listed explicitly.
WILDCARD = "*"
DEFAULT_MISSING = ("", "?", "NA", "NaN", "nan")


@dataclass(frozen=True)
class ColumnSchema:
    """Description of one feature column.

    ``source`` names the raw CSV column (defaults to ``name``). ``value_map``
    maps raw strings to category names (categorical) or to 0/1 (binary).
    ``bin_edges`` on a continuous column fixes the edges :func:`discretize`
    uses instead of quantiles; a value equal to an edge falls in the lower bin.
    """

    name: str
    kind: str
    categories: tuple = ()
    source: str | None = None
    value_map: Mapping | None = None
    bin_edges: tuple | None = None
    bin_labels: tuple | None = None
    single_bin: bool = False
    protected: bool = False
    parent: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2 and not self.single_bin:
                raise DatasetError(f"categorical column {self.name!r} needs at least 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise DatasetError(f"categorical column {self.name!r} has duplicate categories")
        if self.bin_edges is not None:
            object.__setattr__(self, "bin_edges", tuple(float(e) for e in self.bin_edges))
        if self.bin_labels is not None:
            object.__setattr__(self, "bin_labels", tuple(str(b) for b in self.bin_labels))

    @property
    def raw_name(self) -> str:
        return self.source or self.name

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        for key in ("categories", "source", "value_map", "bin_edges", "bin_labels", "parent"):
            value = getattr(self, key)
            if value:
                out[key] = list(value) if isinstance(value, tuple) else (
                    dict(value) if isinstance(value, Mapping) else value)
        if self.single_bin:
            out["single_bin"] = True
        if self.protected:
            out["protected"] = True
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "ColumnSchema":
        kwargs = dict(data)
        for key in ("categories", "bin_edges", "bin_labels"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class DatasetSpec:
    """How to read one raw CSV into a :class:`TabularDataset`."""

    name: str
    label_column: str
    label_remap: Mapping
    protected_column: str
    privileged_value_raw: str
    columns: tuple = ()
    favorable_label_raw: str | None = None
    protected_as_feature: bool = True
    missing_values: tuple = DEFAULT_MISSING
    on_missing: str = "drop"
    notes: str = ""

    def __post_init__(self):
        remap = {str(k): int(v) for k, v in dict(self.label_remap).items()}
        if set(remap.values()) - {0, 1}:
            raise DatasetError(f"{self.name}: label_remap values must be 0 or 1")
        object.__setattr__(self, "label_remap", remap)
        object.__setattr__(self, "privileged_value_raw", str(self.privileged_value_raw))
        cols = tuple(c if isinstance(c, ColumnSchema) else ColumnSchema.from_dict(c) for c in self.columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise DatasetError(f"{self.name}: duplicate column names in schema")
        object.__setattr__(self, "columns", cols)
        if self.favorable_label_raw is None:
            favorable = [k for k, v in remap.items() if v == 1]
            object.__setattr__(self, "favorable_label_raw", favorable[0] if favorable else None)
        else:
            object.__setattr__(self, "favorable_label_raw", str(self.favorable_label_raw))
            if remap.get(self.favorable_label_raw) != 1:
                raise DatasetError(f"{self.name}: favorable label must map to 1")
        if self.on_missing not in ("drop", "error"):
            raise DatasetError(f"{self.name}: on_missing must be 'drop' or 'error'")
        object.__setattr__(self, "missing_values", tuple(self.missing_values))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "label_column": self.label_column,
            "label_remap": dict(self.label_remap),
            "favorable_label_raw": self.favorable_label_raw,
            "protected_column": self.protected_column,
            "privileged_value_raw": self.privileged_value_raw,
            "protected_as_feature": self.protected_as_feature,
            "on_missing": self.on_missing,
            "columns": [c.to_dict() for c in self.columns],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DatasetSpec":
        kwargs = dict(data)
        kwargs["columns"] = tuple(ColumnSchema.from_dict(c) for c in kwargs.get("columns", ()))
        if "missing_values" in kwargs:
            kwargs["missing_values"] = tuple(kwargs["missing_values"])
        return cls(**kwargs)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Encoded features ``X``, labels ``y``, protected flags ``s`` (1 = privileged)
    and instance weights ``w``. Arrays are copied and made read-only."""

    X: np.ndarray
    y: np.ndarray
    s: np.ndarray
    w: np.ndarray | None = None
    schema: tuple = ()
    name: str = ""
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, len(self.schema))
        n = X.shape[0]
        y = np.asarray(self.y).astype(int).reshape(-1)
        s = np.asarray(self.s).astype(int).reshape(-1)
        w = np.ones(n) if self.w is None else np.asarray(self.w, dtype=float).reshape(-1)
        if not (len(y) == len(s) == len(w) == n):
            raise DatasetError(f"length mismatch: X has {n} rows, y {len(y)}, s {len(s)}, w {len(w)}")
        if n and not np.isin(y, (0, 1)).all():
            raise DatasetError("labels must be 0 or 1")
        if n and not np.isin(s, (0, 1)).all():
            raise DatasetError("protected attribute must be 0 or 1")
        if n and not (np.isfinite(w).all() and (w > 0).all()):
            raise DatasetError("instance weights must be positive and finite")
        if np.isnan(X).any():
            raise DatasetError("X contains NaN")
        schema = tuple(self.schema)
        if schema and len(schema) != X.shape[1]:
            raise DatasetError(f"schema describes {len(schema)} columns but X has {X.shape[1]}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "w", _frozen(w))
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.schema]

    def replace(self, **changes) -> "TabularDataset":
        return dataclasses.replace(self, **changes)

    def subset(self, index) -> "TabularDataset":
        index = np.asarray(index, dtype=int)
        return self.replace(X=self.X[index], y=self.y[index], s=self.s[index], w=self.w[index])

    def same_content(self, other: "TabularDataset", atol: float = 0.0) -> bool:
        if self.X.shape != other.X.shape:
            return False
        return (
            np.allclose(self.X, other.X, rtol=0, atol=atol)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.s, other.s)
            and np.allclose(self.w, other.w, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class SplitPair:
    train: TabularDataset
    test: TabularDataset
    seed: int
    train_index: np.ndarray
    test_index: np.ndarray


# ---------------------------------------------------------------------------
# Loading


def _map_categorical(col: ColumnSchema, raw: pd.Series) -> np.ndarray:
    lookup = {c: i for i, c in enumerate(col.categories)}
    vmap = dict(col.value_map or {})
    default = vmap.pop(WILDCARD, None)
    codes = np.empty(len(raw), dtype=float)
    for i, value in enumerate(raw):
        if value in vmap:
            value = str(vmap[value])
        elif value not in lookup and default is not None:
            value = str(default)
        if value not in lookup:
            raise UnseenCategoryError(f"column {col.name!r}: value {value!r} is not a known category")
        codes[i] = lookup[value]
    return codes


def _map_binary(col: ColumnSchema, raw: pd.Series) -> np.ndarray:
    vmap = {str(k): v for k, v in dict(col.value_map or {}).items()}
    default = vmap.pop(WILDCARD, None)
    out = np.empty(len(raw), dtype=float)
    for i, value in enumerate(raw):
        if value in vmap:
            out[i] = int(vmap[value])
        elif value in ("0", "1", "0.0", "1.0"):
            out[i] = float(value)
        elif default is not None:
            out[i] = int(default)
        else:
            raise UnmappableValueError(f"binary column {col.name!r}: cannot map value {value!r}")
    return out


def _map_continuous(col: ColumnSchema, raw: pd.Series) -> np.ndarray:
    try:
        return raw.astype(float).to_numpy()
    except ValueError:
        bad = next(v for v in raw if not _is_number(v))
        raise UnmappableValueError(
            f"continuous column {col.name!r}: non-numeric value {bad!r}") from None


def _is_number(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def load_csv(path, spec: DatasetSpec) -> TabularDataset:
    """Read a header CSV into a validated dataset.

    Labels go through ``spec.label_remap``; the protected column becomes 1 for
    ``spec.privileged_value_raw`` and 0 for the single other value. Rows with a
    missing value in any used column are dropped (counted in ``meta``) or
    rejected, per ``spec.on_missing``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    used = [spec.label_column, spec.protected_column] + [c.raw_name for c in spec.columns]
    missing_cols = [c for c in used if c not in df.columns]
    if missing_cols:
        raise UnknownColumnError(f"{spec.name}: columns not in CSV header: {missing_cols}")

    n_raw = len(df)
    sub = df[list(dict.fromkeys(used))].apply(lambda s: s.str.strip())
    missing_mask = sub.isin(list(spec.missing_values)).any(axis=1).to_numpy()
    n_missing = int(missing_mask.sum())
    if n_missing:
        if spec.on_missing == "error":
            row = int(np.flatnonzero(missing_mask)[0])
            raise MissingValueError(f"{spec.name}: missing value in row {row + 1}")
        logger.info("%s: dropping %d rows with missing values", spec.name, n_missing)
        sub = sub.loc[~missing_mask]

    labels = sub[spec.label_column]
    unknown = sorted(set(labels) - set(spec.label_remap))
    if unknown:
        raise UnmappableValueError(f"{spec.name}: label value(s) {unknown} not in label_remap")
    y = labels.map(spec.label_remap).to_numpy(dtype=int)

    prot = sub[spec.protected_column]
    values = sorted(set(prot))
    if len(values) > 2:
        raise UnmappableValueError(
            f"{spec.name}: protected column {spec.protected_column!r} has more than two values {values}")
    if spec.privileged_value_raw not in values and len(prot):
        raise UnmappableValueError(
            f"{spec.name}: privileged value {spec.privileged_value_raw!r} never occurs")
    s = (prot == spec.privileged_value_raw).to_numpy(dtype=int)
    others = [v for v in values if v != spec.privileged_value_raw]

    columns, schema = [], []
    for col in spec.columns:
        raw = sub[col.raw_name]
        if col.kind == CATEGORICAL:
            columns.append(_map_categorical(col, raw))
        elif col.kind == BINARY:
            columns.append(_map_binary(col, raw))
        else:
            columns.append(_map_continuous(col, raw))
        schema.append(col)
    if spec.protected_as_feature:
        columns.append(s.astype(float))
        schema.append(ColumnSchema(spec.protected_column, BINARY, protected=True))

    X = np.column_stack(columns) if columns else np.zeros((len(sub), 0))
    meta = {
        "source": str(path),
        "n_raw": n_raw,
        "n_dropped_missing": n_missing,
        "unprivileged_value_raw": others[0] if others else None,
    }
    return TabularDataset(X, y, s, None, tuple(schema), spec.name, meta)


def write_csv(ds: TabularDataset, path, spec: DatasetSpec) -> None:
    """Write ``ds`` back out in the raw layout ``spec`` reads.

    Categorical cells are written as category names, continuous cells with
    ``repr`` precision, so ``load_csv`` recovers the numeric content.
    """
    inverse_label = {}
    for raw, v in spec.label_remap.items():
        inverse_label.setdefault(v, raw)
    if spec.favorable_label_raw is not None:
        inverse_label[1] = spec.favorable_label_raw
    other = ds.meta.get("unprivileged_value_raw") or f"not_{spec.privileged_value_raw}"
    header = [c.raw_name for c in spec.columns] + [spec.label_column, spec.protected_column]
    by_name = {c.name: j for j, c in enumerate(ds.schema)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = []
            for col in spec.columns:
                value = ds.X[i, by_name[col.name]]
                if col.kind == CATEGORICAL:
                    row.append(col.categories[int(value)])
                elif col.kind == BINARY:
                    row.append(str(int(value)))
                else:
                    row.append(repr(float(value)))
            row.append(inverse_label[int(ds.y[i])])
            row.append(spec.privileged_value_raw if ds.s[i] == 1 else other)
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Encoding


def encode_onehot(ds: TabularDataset) -> TabularDataset:
    """Expand every categorical column into one binary column per category."""
    blocks, schema = [], []
    for j, col in enumerate(ds.schema):
        values = ds.X[:, j]
        if col.kind != CATEGORICAL:
            blocks.append(values[:, None])
            schema.append(col)
            continue
        c = len(col.categories)
        codes = values.astype(int)
        bad = (codes != values) | (codes < 0) | (codes >= c)
        if bad.any():
            raise UnseenCategoryError(
                f"column {col.name!r}: code {values[bad][0]!r} outside the {c} known categories")
        block = np.zeros((ds.n, c))
        block[np.arange(ds.n), codes] = 1.0
        blocks.append(block)
        schema.extend(
            ColumnSchema(f"{col.name}={cat}", BINARY, parent=col.name, protected=col.protected)
            for cat in col.categories
        )
    X = np.hstack(blocks) if blocks else np.zeros((ds.n, 0))
    return ds.replace(X=X, schema=tuple(schema))


def _quantile_edges(values: np.ndarray, bins: int) -> tuple:
    qs = np.quantile(values, np.arange(1, bins) / bins)
    edges = np.unique(qs)
    # Edges at or above the maximum would leave an empty top bin.
    return tuple(float(e) for e in edges if e < values.max())


def discretize(ds: TabularDataset, bins_per_column: int = 4) -> TabularDataset:
    """Replace continuous columns by bin codes.

    Columns carrying ``bin_edges`` use them; others get equal-frequency edges
    from the data. A value equal to an edge belongs to the lower bin. A column
    with one distinct value collapses to a single bin (``single_bin=True``).
    """
    if bins_per_column < 2:
        raise DatasetError("bins_per_column must be at least 2")
    X = np.array(ds.X, copy=True)
    schema = list(ds.schema)
    for j, col in enumerate(ds.schema):
        if col.kind != CONTINUOUS:
            continue
        values = X[:, j]
        if col.bin_edges is not None:
            edges = col.bin_edges
        elif len(values):
            edges = _quantile_edges(values, bins_per_column)
        else:
            edges = ()
        X[:, j] = np.searchsorted(np.asarray(edges, dtype=float), values, side="left")
        n_bins = len(edges) + 1
        labels = col.bin_labels if col.bin_labels and len(col.bin_labels) == n_bins else tuple(
            f"bin{b}" for b in range(n_bins))
        schema[j] = dataclasses.replace(
            col, kind=CATEGORICAL, categories=labels, bin_edges=tuple(edges),
            bin_labels=labels, single_bin=n_bins == 1,
        )
    return ds.replace(X=X, schema=tuple(schema))


# ---------------------------------------------------------------------------
# Splitting


def _cell_train_counts(sizes: Sequence[int], n_train: int) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=int)
    total = sizes.sum()
    exact = sizes * n_train / total
    counts = np.floor(exact).astype(int)
    # Keep both sides of every cell with >= 2 rows populated.
    lo = np.where(sizes >= 2, 1, 0)
    hi = np.where(sizes >= 2, sizes - 1, sizes)
    counts = np.clip(counts, lo, hi)
    remainder = exact - counts
    while counts.sum() < n_train:
        room = np.where(counts < hi, remainder, -np.inf)
        if not np.isfinite(room).any():
            room = np.where(counts < sizes, remainder, -np.inf)
        k = int(np.argmax(room))
        counts[k] += 1
        remainder[k] -= 1
    while counts.sum() > n_train:
        room = np.where(counts > lo, -remainder, -np.inf)
        if not np.isfinite(room).any():
            room = np.where(counts > 0, -remainder, -np.inf)
        k = int(np.argmax(room))
        counts[k] -= 1
        remainder[k] += 1
    return counts


def split(ds: TabularDataset, train_fraction: float = 0.7, seed: int = 0,
          stratify: bool = True) -> SplitPair:
    """Random train/test split with ``|train| = round(train_fraction * n)``.

    Rows are shuffled within each (label, protected) cell so every populated
    cell keeps rows on both sides when it has at least two.
    """
    if not 0.0 < train_fraction < 1.0:
        raise SplitError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = ds.n
    if n < 2:
        raise SplitError("need at least two rows to split")
    n_train = int(math.floor(train_fraction * n + 0.5))
    if n_train <= 0 or n_train >= n:
        raise SplitError(f"train_fraction {train_fraction} leaves one side empty for n={n}")
    rng = np.random.default_rng(seed)
    if stratify:
        cell = ds.y * 2 + ds.s
        groups = [np.flatnonzero(cell == c) for c in range(4)]
        groups = [g for g in groups if len(g)]
        counts = _cell_train_counts([len(g) for g in groups], n_train)
        train_parts, test_parts = [], []
        for g, k in zip(groups, counts):
            perm = rng.permutation(g)
            train_parts.append(perm[:k])
            test_parts.append(perm[k:])
        train_idx = np.concatenate(train_parts)
        test_idx = np.concatenate(test_parts)
        # Interleave cells so row order carries no cell structure.
        train_idx = train_idx[rng.permutation(len(train_idx))]
        test_idx = test_idx[rng.permutation(len(test_idx))]
    else:
        perm = rng.permutation(n)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
    return SplitPair(ds.subset(train_idx), ds.subset(test_idx), seed,
                     _frozen(train_idx), _frozen(test_idx))


def dataset_to_dict(ds: TabularDataset) -> dict:
    return {
        "name": ds.name,
        "columns": [c.to_dict() for c in ds.schema],
        "X": ds.X.tolist(),
        "y": ds.y.tolist(),
        "s": ds.s.tolist(),
        "w": ds.w.tolist(),
    }
