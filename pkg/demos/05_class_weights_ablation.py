"""Why class weights matter on 99:1-style imbalance.

Trains the same classifier twice on a skewed synthetic dataset, once with
balanced class weights w[c] = N/(K*n_c) and once without, then compares
per-class recall, balanced error rate, and plain accuracy. The unweighted
model looks better on accuracy while ignoring the rare classes entirely.

Run: python demos/05_class_weights_ablation.py
"""

import numpy as np

from sevpred import (
    ClassifierConfig,
    SyntheticSpec,
    assemble,
    build_classifier,
    compute_class_weights,
    fit_one_hot,
    fit_standardizer,
    generate_synthetic,
    predict,
    stratified_split,
    train_classifier,
)
from sevpred.dataset import ColumnKind
from sevpred.evaluation import evaluate_predictions

table = generate_synthetic(
    SyntheticSpec(12_000, (0.005, 0.70, 0.27, 0.025),
                  n_numeric=8, n_categorical=2, class_shift=0.4, seed=42)
)
numeric = [n for n, k in table.schema.columns if k == ColumnKind.NUMERIC]
categorical = [n for n, k in table.schema.columns if k == ColumnKind.CATEGORICAL]
features = assemble(table, fit_one_hot(table, categorical), fit_standardizer(table, numeric))
y = table.target
split = stratified_split(y, seed=7)

weights = compute_class_weights(y[split.train], 4)
print("balanced class weights:", np.round(weights.w, 2))

def train_and_eval(use_weights):
    cfg = ClassifierConfig(initial_neurons=64, initial_dropout=0.2, batch_size=256,
                           l2_penalty=1e-4, epochs=12, learning_rate=2e-3,
                           use_class_weights=use_weights, seed=3)
    params, _ = train_classifier(
        cfg, features.values[split.train], y[split.train],
        features.values[split.val], y[split.val],
        class_weights=weights if use_weights else None, n_classes=4,
    )
    spec = build_classifier(cfg, features.d, 4)
    preds = predict(params, spec, features.values[split.test])
    return evaluate_predictions(preds, y[split.test], 4)

for name, report in (("weighted", train_and_eval(True)), ("unweighted", train_and_eval(False))):
    recalls = [f"{r:.2f}" if r is not None else "n/a" for r in report.per_class_recall]
    print(f"\n{name}:")
    print(f"  accuracy {report.accuracy:.3f}   BER {report.ber:.3f}")
    print(f"  per-class recall {recalls}")
print("\nthe weighted model trades headline accuracy for rare-class recall")
