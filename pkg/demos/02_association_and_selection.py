"""Measuring categorical association with Cramer's V.

Builds contingency tables by hand to show the chi-square -> V path, then
computes a full association matrix over a mixed-type table (numerics join via
quantile binning) and selects the columns most associated with the target.

Run: python demos/02_association_and_selection.py
"""

import numpy as np

from sevpred import (
    SyntheticSpec,
    association_matrix,
    bin_numeric,
    build_contingency,
    chi_square,
    cramers_v,
    generate_synthetic,
    select_features,
)

# Hand-sized example first: a 2x2 table with visible dependence.
ct = build_contingency(
    ["wet", "wet", "wet", "dry", "dry", "dry"],
    ["crash", "crash", "safe", "safe", "safe", "crash"],
)
print("counts:\n", ct.counts)
print("chi-square:", round(chi_square(ct), 4))
print("Cramer's V:", round(cramers_v(ct), 4))
print("V (bias corrected):", round(cramers_v(ct, bias_corrected=True), 4))

# Quantile binning is how numeric columns take part.
values = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0])
print("\nquartile bins of", values.tolist(), "->", bin_numeric(values, 4).tolist())

# Full matrix over a synthetic table; cat_0 is made to copy the target so it
# tops the ranking.
table = generate_synthetic(
    SyntheticSpec(3000, (0.1, 0.5, 0.3, 0.1), n_numeric=2, n_categorical=2, seed=7)
)
table.columns["cat_0"] = np.array([f"t{v}" for v in table.target], dtype=object)

matrix = association_matrix(table, n_bins=8)
print("\nassociation matrix labels:", matrix.labels)
print(np.round(matrix.values, 3))

report = select_features(table, threshold=0.2, n_bins=8)
print("\nranked against the target:")
for name, v in report.ranked:
    marker = "*" if name in report.selected else " "
    print(f"  {marker} {name:8s} V={v:.4f}")
print("selected at threshold 0.2:", report.selected)
