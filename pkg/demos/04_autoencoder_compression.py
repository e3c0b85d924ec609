"""Compressing 64 features into 8 with the mirrored autoencoder.

The data has intrinsic dimension 8 hidden in 64 standardized columns, so a
64 -> 32 -> 8 encoder can keep most of the variance. Prints the loss curve,
the reconstruction R-squared, and the latent matrix shape.

Run: python demos/04_autoencoder_compression.py
"""

import numpy as np

from sevpred import AutoencoderConfig, FeatureMatrix, build_autoencoder, encode, train_autoencoder

rng = np.random.default_rng(4)
n, d, intrinsic = 3000, 64, 8
x = rng.standard_normal((n, intrinsic)) @ rng.standard_normal((intrinsic, d))
x = (x - x.mean(axis=0)) / x.std(axis=0)
labels = tuple(f"f{i}" for i in range(d))
train = FeatureMatrix(x[:2400], labels)
val = FeatureMatrix(x[2400:], labels)

cfg = AutoencoderConfig(
    input_dim=d, encoder_widths=(32, 8), epochs=60, batch_size=256,
    seed=21, learning_rate=2e-3,
)
params, history = train_autoencoder(cfg, train, val)

print("epoch  train_mse  val_mse")
for epoch in (0, 4, 9, 19, 39, 59):
    print(f"{epoch:5d}  {history['train_mse'][epoch]:9.4f}  {history['val_mse'][epoch]:7.4f}")

variance = val.values.var()
r_squared = 1 - history["val_mse"][-1] / variance
print(f"\nreconstruction R^2 on validation: {r_squared:.4f}")

latent = encode(build_autoencoder(cfg), params, val)
print(f"encoded validation block: {latent.n} x {latent.d} ({latent.column_labels})")
print("ready for export to any external 2-D projection tool")
