"""Hyperparameter grid search and stratified cross-validation.

Runs a small Cartesian grid (the production lists are 3x3x3x2 = 54 cells)
ranked by validation BER, then 5-fold cross-validates the winning cell and
reports mean and sample standard deviation, the two numbers a comparison
table needs.

Run: python demos/06_grid_search_and_cv.py
"""

from sevpred import (
    ClassifierConfig,
    GridSpec,
    SyntheticSpec,
    assemble,
    build_classifier,
    compute_class_weights,
    cross_validate,
    fit_one_hot,
    fit_standardizer,
    generate_synthetic,
    grid_search,
    predict,
    stratified_split,
    train_classifier,
)
from sevpred.dataset import ColumnKind

table = generate_synthetic(
    SyntheticSpec(4000, (0.1, 0.5, 0.3, 0.1), n_numeric=5, n_categorical=2,
                  class_shift=0.7, seed=17)
)
numeric = [n for n, k in table.schema.columns if k == ColumnKind.NUMERIC]
categorical = [n for n, k in table.schema.columns if k == ColumnKind.CATEGORICAL]
features = assemble(table, fit_one_hot(table, categorical), fit_standardizer(table, numeric))
y = table.target
split = stratified_split(y, seed=31)
weights = compute_class_weights(y[split.train], 4)

grid = GridSpec(
    initial_neurons=(32, 64),
    initial_dropout=(0.2, 0.3),
    batch_size=(256,),
    l2_penalty=(0.001, 0.0001),
)
base = ClassifierConfig(epochs=6, learning_rate=2e-3, seed=0)
results = grid_search(
    grid,
    features.values[split.train], y[split.train],
    features.values[split.val], y[split.val],
    base_config=base, class_weights=weights, seed=123, n_classes=4,
)
print(f"{grid.size()} cells, ranked by validation BER:")
for rank, cell in enumerate(results):
    c = cell.config
    print(f"  #{rank}: neurons={c['initial_neurons']:3d} dropout={c['initial_dropout']} "
          f"l2={c['l2_penalty']}  BER={cell.val_ber:.4f} acc={cell.val_accuracy:.4f}")

winner = results[0].config
print("\nwinning cell:", winner)

def runner(train_x, train_y, val_x, val_y, seed):
    cfg = ClassifierConfig(
        initial_neurons=winner["initial_neurons"], initial_dropout=winner["initial_dropout"],
        batch_size=winner["batch_size"], l2_penalty=winner["l2_penalty"],
        epochs=6, learning_rate=2e-3, seed=seed,
    )
    w = compute_class_weights(train_y, 4)
    params, _ = train_classifier(cfg, train_x, train_y, val_x, val_y, w, n_classes=4)
    spec = build_classifier(cfg, train_x.shape[1], 4)
    return lambda x: predict(params, spec, x)

cv = cross_validate(runner, features.values, y, k=5, seed=777, n_classes=4)
print(f"\n5-fold CV of the winner: BER {cv.mean_ber:.4f} (sd {cv.std_ber:.4f}), "
      f"accuracy {cv.mean_accuracy:.4f} (sd {cv.std_accuracy:.4f})")
