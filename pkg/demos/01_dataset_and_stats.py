"""Ingesting messy mixed-type CSVs against a declared schema.

Walks through: generating a deterministic imbalanced synthetic table, writing
it to CSV, damaging a few cells, ingesting it back with the schema, imputing
the holes, and printing the plot-ready summary statistics.

Run: python demos/01_dataset_and_stats.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from sevpred import (
    SyntheticSpec,
    class_distribution,
    generate_synthetic,
    impute,
    ingest_csv,
    summarize,
    write_csv,
)

work = Path(tempfile.mkdtemp(prefix="sevpred_demo_"))

# A severity-like imbalance: class 2 dominates, classes 1 and 4 are rare.
spec = SyntheticSpec(
    n_rows=2000,
    class_proportions=(0.01, 0.70, 0.27, 0.02),
    n_numeric=3,
    n_categorical=2,
    class_shift=1.0,
    seed=101,
)
table = generate_synthetic(spec)
print("synthetic class distribution:", np.round(class_distribution(table), 4))

csv_path = work / "accidents.csv"
write_csv(table, csv_path)

# Damage the file: blank a target, scribble over a numeric cell.
lines = csv_path.read_text().splitlines()
broken = lines[5].split(",")
broken[-1] = ""  # missing severity -> row will be dropped
lines[5] = ",".join(broken)
broken = lines[9].split(",")
broken[0] = "not-a-number"  # unparseable numeric -> marked missing
lines[9] = ",".join(broken)
csv_path.write_text("\n".join(lines) + "\n")

loaded = ingest_csv(csv_path, table.schema)
print(f"ingested {loaded.n_rows} rows, dropped {loaded.n_dropped} with missing severity")
print("missing numeric cells:", int(loaded.missing['num_0'].sum()))

clean = impute(loaded)
print("after imputation, any missing cells?", clean.has_missing())

stats = summarize(loaded)
print("\nper-column summary (stats artifact):")
print(json.dumps({k: stats["columns"][k] for k in ("num_0", "cat_0", "severity")}, indent=2))
