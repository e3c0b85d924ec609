"""Schema-driven tabular data: CSV ingestion, imputation, summary statistics,
and a synthetic imbalanced-data generator for desk-scale experiments.

A :class:`Table` is column-oriented: numeric columns are float64 arrays,
categorical/boolean columns are string object arrays, the target column is an
int64 array of labels in ``1..K``. A per-cell boolean mask records missing
values until :func:`impute` clears them. Tables are treated as immutable
after construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    AllMissingColumn,
    DataError,
    EmptyFile,
    InvalidProportions,
    MissingColumn,
    TargetOutOfRange,
)
from .rng import make_rng


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    BOOLEAN = "boolean"
    TARGET = "target"


@dataclass(frozen=True)
class SchemaSpec:
    """Ordered column declaration plus the target cardinality K.

    Exactly one column must have kind ``target``. Boolean columns are stored
    and later encoded exactly like categoricals; the kind exists so schema
    files stay self-describing.
    """

    columns: tuple[tuple[str, ColumnKind], ...]
    target_cardinality: int

    def __post_init__(self):
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise DataError("schema column names must be unique")
        targets = [name for name, kind in self.columns if kind == ColumnKind.TARGET]
        if len(targets) != 1:
            raise DataError(f"schema needs exactly one target column, got {targets}")
        if self.target_cardinality < 2:
            raise DataError("target_cardinality must be at least 2")

    @property
    def target(self) -> str:
        return next(n for n, k in self.columns if k == ColumnKind.TARGET)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    def kind_of(self, name: str) -> ColumnKind:
        for n, k in self.columns:
            if n == name:
                return k
        raise MissingColumn(name)

    def feature_names(self) -> list[str]:
        return [n for n, k in self.columns if k != ColumnKind.TARGET]


def schema_from_dict(obj: dict) -> SchemaSpec:
    cols = tuple(
        (c["name"], ColumnKind(c["kind"])) for c in obj["columns"]
    )
    return SchemaSpec(columns=cols, target_cardinality=int(obj["target_cardinality"]))


def schema_to_dict(schema: SchemaSpec) -> dict:
    return {
        "columns": [{"name": n, "kind": k.value} for n, k in schema.columns],
        "target_cardinality": schema.target_cardinality,
    }


def load_schema(path: str | Path) -> SchemaSpec:
    """Load a schema from the JSON file format used by the CLI."""
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


@dataclass
class Table:
    """Column store with schema, per-cell missing mask, and row count.

    ``n_dropped`` counts rows removed at ingestion because their target was
    missing or blank.
    """

    schema: SchemaSpec
    columns: dict[str, np.ndarray]
    missing: dict[str, np.ndarray]
    n_rows: int
    n_dropped: int = 0

    def __post_init__(self):
        for name in self.schema.names:
            if name not in self.columns:
                raise MissingColumn(name)
            if len(self.columns[name]) != self.n_rows:
                raise DataError(f"column {name!r} length != n_rows")
            if len(self.missing[name]) != self.n_rows:
                raise DataError(f"missing mask for {name!r} length != n_rows")
        tgt = self.schema.target
        if self.missing[tgt].any():
            raise DataError("target column must have no missing cells")
        if self.n_rows:
            t = self.columns[tgt]
            bad = (t < 1) | (t > self.schema.target_cardinality)
            if bad.any():
                row = int(np.flatnonzero(bad)[0])
                raise TargetOutOfRange(row, int(t[row]), self.schema.target_cardinality)

    @property
    def target(self) -> np.ndarray:
        return self.columns[self.schema.target]

    def has_missing(self) -> bool:
        return any(m.any() for m in self.missing.values())

    def select_rows(self, indices) -> "Table":
        """New table containing the given rows, in the given order."""
        idx = np.asarray(indices, dtype=np.int64)
        cols = {n: v[idx] for n, v in self.columns.items()}
        miss = {n: v[idx] for n, v in self.missing.items()}
        return Table(self.schema, cols, miss, int(len(idx)), self.n_dropped)


def _parse_numeric(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def _parse_target(text: str, cardinality: int, row: int) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if not value.is_integer() or not (1 <= value <= cardinality):
        raise TargetOutOfRange(row, text, cardinality)
    return int(value)


def ingest_csv(path: str | Path, schema: SchemaSpec, *, require_target: bool = True) -> Table:
    """Load an RFC-4180 CSV into a Table, parsing cells per schema kind.

    Unparseable numeric cells are marked missing; categorical/boolean cells
    are taken verbatim (trimmed). Rows whose target cell is missing or
    unparseable are dropped and counted in ``Table.n_dropped``. A parseable
    target outside ``1..K`` raises :class:`TargetOutOfRange`.

    With ``require_target=False`` the target column may be absent from the
    header; all rows then receive the placeholder label 1 (used by ``predict``
    on unlabeled data).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        positions: dict[str, int] = {}
        target_name = schema.target
        for name in schema.names:
            if name in header:
                positions[name] = header.index(name)
            elif name == target_name and not require_target:
                continue
            else:
                raise MissingColumn(name)
        rows = list(reader)

    target_absent = target_name not in positions
    raw: dict[str, list] = {n: [] for n in schema.names}
    miss: dict[str, list] = {n: [] for n in schema.names}
    n_dropped = 0
    for i, row in enumerate(rows):
        if not row:
            continue
        if target_absent:
            tgt = 1
        else:
            pos = positions[target_name]
            cell = row[pos] if pos < len(row) else ""
            tgt = _parse_target(cell, schema.target_cardinality, i)
            if tgt is None:
                n_dropped += 1
                continue
        for name, kind in schema.columns:
            if kind == ColumnKind.TARGET:
                raw[name].append(tgt)
                miss[name].append(False)
                continue
            pos = positions[name]
            cell = row[pos] if pos < len(row) else ""
            if kind == ColumnKind.NUMERIC:
                value = _parse_numeric(cell)
                raw[name].append(np.nan if value is None else value)
                miss[name].append(value is None)
            else:
                text = cell.strip()
                raw[name].append(text)
                miss[name].append(not text)

    n = len(raw[target_name])
    columns: dict[str, np.ndarray] = {}
    missing: dict[str, np.ndarray] = {}
    for name, kind in schema.columns:
        if kind == ColumnKind.NUMERIC:
            columns[name] = np.asarray(raw[name], dtype=np.float64)
        elif kind == ColumnKind.TARGET:
            columns[name] = np.asarray(raw[name], dtype=np.int64)
        else:
            columns[name] = np.asarray(raw[name], dtype=object)
        missing[name] = np.asarray(miss[name], dtype=bool)
    return Table(schema, columns, missing, n, n_dropped)


def write_csv(table: Table, path: str | Path) -> None:
    """Write a table back to CSV; missing cells become empty strings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.schema.names)
        for i in range(table.n_rows):
            row = []
            for name, kind in table.schema.columns:
                if table.missing[name][i]:
                    row.append("")
                elif kind == ColumnKind.NUMERIC:
                    row.append(repr(float(table.columns[name][i])))
                elif kind == ColumnKind.TARGET:
                    row.append(str(int(table.columns[name][i])))
                else:
                    row.append(str(table.columns[name][i]))
            writer.writerow(row)


def impute(table: Table) -> Table:
    """Fill missing cells: numeric columns get the column median over the
    observed values, categorical columns get the literal category "Unknown".

    Raises :class:`AllMissingColumn` for a numeric column with no observed
    values. Returns a new table with an all-false missing mask.
    """
    columns: dict[str, np.ndarray] = {}
    missing: dict[str, np.ndarray] = {}
    for name, kind in table.schema.columns:
        values = table.columns[name]
        mask = table.missing[name]
        if not mask.any():
            columns[name] = values
            missing[name] = np.zeros(table.n_rows, dtype=bool)
            continue
        if kind == ColumnKind.NUMERIC:
            observed = values[~mask]
            if observed.size == 0:
                raise AllMissingColumn(name)
            filled = values.copy()
            filled[mask] = np.median(observed)
        else:
            filled = values.copy()
            filled[mask] = "Unknown"
        columns[name] = filled
        missing[name] = np.zeros(table.n_rows, dtype=bool)
    return Table(table.schema, columns, missing, table.n_rows, table.n_dropped)


def class_distribution(table: Table) -> np.ndarray:
    """Per-class target proportions, indexed 0..K-1 for labels 1..K."""
    if table.n_rows == 0:
        raise DataError("empty table has no class distribution")
    k = table.schema.target_cardinality
    counts = np.bincount(table.target, minlength=k + 1)[1:]
    return counts / table.n_rows


def summarize(table: Table) -> dict:
    """Plot-ready per-column summary (the `stats` CLI payload).

    Numeric columns report min/median/max over observed values; categorical
    columns report their top-10 category counts.
    """
    cols = {}
    for name, kind in table.schema.columns:
        mask = table.missing[name]
        entry: dict = {
            "kind": kind.value,
            "missing_rate": float(mask.mean()) if table.n_rows else 0.0,
        }
        values = table.columns[name][~mask]
        if kind == ColumnKind.NUMERIC:
            if values.size:
                entry.update(
                    min=float(np.min(values)),
                    median=float(np.median(values)),
                    max=float(np.max(values)),
                )
            else:
                entry.update(min=None, median=None, max=None)
        elif kind == ColumnKind.TARGET:
            entry["distribution"] = class_distribution(table).tolist() if table.n_rows else []
        else:
            cats, counts = np.unique(values.astype(str), return_counts=True) if values.size else ([], [])
            order = np.argsort(counts)[::-1][:10] if len(cats) else []
            entry["top_categories"] = [[str(cats[i]), int(counts[i])] for i in order]
        cols[name] = entry
    return {
        "n_rows": table.n_rows,
        "n_dropped_missing_target": table.n_dropped,
        "class_distribution": class_distribution(table).tolist() if table.n_rows else [],
        "columns": cols,
    }


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic, class-imbalanced synthetic table.

    Class counts are the largest-remainder rounding of
    ``n_rows * class_proportions`` rather than a multinomial draw, so
    imbalance behavior is exactly reproducible. Numeric features are unit
    normals around per-class centroids scaled by ``class_shift``; categorical
    features draw from per-class category frequencies skewed by the same
    factor.
    """

    n_rows: int
    class_proportions: tuple[float, ...]
    n_numeric: int
    n_categorical: int
    class_shift: float = 1.0
    seed: int = 0
    n_categories: int = 5

    def __post_init__(self):
        p = np.asarray(self.class_proportions, dtype=np.float64)
        if p.ndim != 1 or len(p) < 2:
            raise InvalidProportions("need at least two class proportions")
        if (p <= 0).any():
            raise InvalidProportions("class proportions must be strictly positive")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidProportions(f"class proportions sum to {p.sum()!r}, not 1")
        if self.n_rows < 1:
            raise DataError("n_rows must be positive")


def largest_remainder_counts(total: int, proportions: np.ndarray) -> np.ndarray:
    """Integer allocation of `total` by proportion: floors first, then the
    largest fractional remainders win the leftover seats (ties by index)."""
    quotas = np.asarray(proportions, dtype=np.float64) * total
    counts = np.floor(quotas).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder > 0:
        # stable sort keeps index order on remainder ties
        order = np.argsort(-(quotas - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def generate_synthetic(spec: SyntheticSpec) -> Table:
    """Deterministic synthetic table matching the spec's class proportions."""
    k = len(spec.class_proportions)
    counts = largest_remainder_counts(spec.n_rows, np.asarray(spec.class_proportions))
    rng = make_rng(spec.seed)

    labels = np.repeat(np.arange(1, k + 1), counts)
    centroids = spec.class_shift * rng.standard_normal((k, spec.n_numeric)) if spec.n_numeric else np.zeros((k, 0))
    numeric = centroids[labels - 1] + rng.standard_normal((spec.n_rows, spec.n_numeric))

    cat_columns = []
    for _ in range(spec.n_categorical):
        logits = spec.class_shift * rng.standard_normal((k, spec.n_categories))
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(spec.n_rows)
        draws = (cdf[labels - 1] < u[:, None]).sum(axis=1)
        cat_columns.append(draws)

    order = rng.permutation(spec.n_rows)
    labels = labels[order]
    numeric = numeric[order]
    cat_columns = [c[order] for c in cat_columns]

    columns: dict[str, np.ndarray] = {}
    schema_cols: list[tuple[str, ColumnKind]] = []
    for j in range(spec.n_numeric):
        name = f"num_{j}"
        schema_cols.append((name, ColumnKind.NUMERIC))
        columns[name] = numeric[:, j].copy()
    for j in range(spec.n_categorical):
        name = f"cat_{j}"
        schema_cols.append((name, ColumnKind.CATEGORICAL))
        columns[name] = np.array([f"k{v}" for v in cat_columns[j]], dtype=object)
    schema_cols.append(("severity", ColumnKind.TARGET))
    columns["severity"] = labels.astype(np.int64)

    schema = SchemaSpec(columns=tuple(schema_cols), target_cardinality=k)
    missing = {n: np.zeros(spec.n_rows, dtype=bool) for n in columns}
    return Table(schema, columns, missing, spec.n_rows)
