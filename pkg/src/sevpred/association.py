"""Categorical association: contingency tables, chi-square, Cramer's V,
pairwise association matrices, and threshold-based feature selection.

Numeric columns take part through equal-frequency (quantile) binning, so one
measure covers every column-type pair. Plain (uncorrected) V is the default;
the small-sample bias correction sits behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ColumnKind, Table
from .errors import DataError, LengthMismatch

DEFAULT_BINS = 10


@dataclass(frozen=True)
class ContingencyTable:
    """Cross-tabulated co-occurrence counts; rows and columns carry labels
    in first-appearance order of the source arrays."""

    counts: np.ndarray
    row_labels: tuple
    col_labels: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise DataError("contingency counts must be a non-empty 2-D matrix")
        if (c < 0).any():
            raise DataError("contingency counts must be non-negative")
        if c.sum() < 1:
            raise DataError("contingency table must contain at least one observation")
        if len(self.row_labels) != c.shape[0] or len(self.col_labels) != c.shape[1]:
            raise DataError("label lists must match matrix dimensions")

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class AssociationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray


@dataclass(frozen=True)
class SelectionReport:
    """Columns ranked by association with the target; ``selected`` keeps
    those at or above the threshold (target itself excluded)."""

    threshold: float
    ranked: tuple[tuple[str, float], ...]
    selected: tuple[str, ...]


def bin_numeric(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Equal-frequency binning: edges at the i/n_bins empirical quantiles.

    Values equal to an edge go to the lower bin; empty bins (from duplicate
    edges under heavy ties) are collapsed so bin indices are consecutive.
    A constant column yields a single bin for every row.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("cannot bin an empty column")
    if n_bins < 2:
        raise DataError("n_bins must be at least 2")
    qs = np.arange(1, n_bins) / n_bins
    edges = np.unique(np.quantile(values, qs))
    # count of edges strictly below each value = bin index; ties land low
    bins = np.searchsorted(edges, values, side="left")
    _, collapsed = np.unique(bins, return_inverse=True)
    return collapsed.astype(np.int64)


def build_contingency(a, b) -> ContingencyTable:
    """Count co-occurrences of two equal-length category arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    if len(a) != len(b):
        raise LengthMismatch(f"category arrays differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise DataError("cannot tabulate empty arrays")
    row_labels, first_a, ai = np.unique(a, return_index=True, return_inverse=True)
    col_labels, first_b, bi = np.unique(b, return_index=True, return_inverse=True)
    # remap unique's sorted order to first-appearance order
    row_order = np.argsort(first_a, kind="stable")
    col_order = np.argsort(first_b, kind="stable")
    flat = np.bincount(
        ai * len(col_labels) + bi, minlength=len(row_labels) * len(col_labels)
    )
    counts = flat.reshape(len(row_labels), len(col_labels)).astype(np.int64)
    counts = counts[np.ix_(row_order, col_order)]
    return ContingencyTable(
        counts=counts,
        row_labels=tuple(row_labels[row_order].tolist()),
        col_labels=tuple(col_labels[col_order].tolist()),
    )


def chi_square(table: ContingencyTable) -> float:
    """Pearson chi-square statistic; cells with zero expected count
    contribute nothing."""
    counts = np.asarray(table.counts, dtype=np.float64)
    n = counts.sum()
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (counts - expected) ** 2 / expected, 0.0)
    # canonical summation order: the statistic is bit-identical under row or
    # column permutation and transpose, so association matrices are exactly
    # symmetric and exactly reproducible from pairwise calls
    return float(np.sort(terms, axis=None).sum())


def cramers_v(table: ContingencyTable, bias_corrected: bool = False) -> float:
    """Cramer's V in [0, 1]; tables with a single row or column return 0.

    The bias-corrected form replaces chi2/n with
    max(0, chi2/n - (r-1)(c-1)/(n-1)) and shrinks r and c accordingly.
    """
    r, c = table.counts.shape
    n = table.n
    if min(r, c) <= 1:
        return 0.0
    phi2 = chi_square(table) / n
    if bias_corrected:
        if n <= 1:
            return 0.0
        phi2 = max(0.0, phi2 - (r - 1) * (c - 1) / (n - 1))
        r = r - (r - 1) ** 2 / (n - 1)
        c = c - (c - 1) ** 2 / (n - 1)
        denom = min(r, c) - 1
        if denom <= 0:
            return 0.0
    else:
        denom = min(r, c) - 1
    v = np.sqrt(phi2 / denom)
    return float(np.clip(v, 0.0, 1.0))


def _categorize(table: Table, name: str, n_bins: int) -> np.ndarray:
    """Column as a category array: numeric columns are quantile-binned,
    everything else is used verbatim."""
    kind = table.schema.kind_of(name)
    values = table.columns[name]
    if kind == ColumnKind.NUMERIC:
        return bin_numeric(values, n_bins)
    return values


def column_pair_v(
    table: Table, a: str, b: str, n_bins: int = DEFAULT_BINS, bias_corrected: bool = False
) -> float:
    ct = build_contingency(_categorize(table, a, n_bins), _categorize(table, b, n_bins))
    return cramers_v(ct, bias_corrected=bias_corrected)


def association_matrix(
    table: Table, n_bins: int = DEFAULT_BINS, bias_corrected: bool = False
) -> AssociationMatrix:
    """Pairwise Cramer's V over all schema columns (target included).

    Requires an imputed table. Diagonal forced to 1; the matrix is symmetric
    by construction since each pair is computed once.
    """
    if table.has_missing():
        raise DataError("association_matrix requires an imputed table")
    names = table.schema.names
    cats = {name: _categorize(table, name, n_bins) for name in names}
    m = len(names)
    values = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            ct = build_contingency(cats[names[i]], cats[names[j]])
            v = cramers_v(ct, bias_corrected=bias_corrected)
            values[i, j] = v
            values[j, i] = v
    return AssociationMatrix(labels=tuple(names), values=values)


def select_features(
    table: Table,
    threshold: float,
    n_bins: int = DEFAULT_BINS,
    bias_corrected: bool = False,
) -> SelectionReport:
    """Rank non-target columns by V against the target and keep those with
    V >= threshold. Ties keep schema order (the sort is stable)."""
    if table.has_missing():
        raise DataError("select_features requires an imputed table")
    target_name = table.schema.target
    target_cats = table.columns[target_name]
    scored = []
    for name in table.schema.names:
        if name == target_name:
            continue
        ct = build_contingency(_categorize(table, name, n_bins), target_cats)
        scored.append((name, cramers_v(ct, bias_corrected=bias_corrected)))
    ranked = sorted(scored, key=lambda item: -item[1])
    selected = tuple(name for name, v in ranked if v >= threshold)
    return SelectionReport(threshold=float(threshold), ranked=tuple(ranked), selected=selected)
