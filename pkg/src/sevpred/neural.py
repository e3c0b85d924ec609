"""From-scratch dense-network engine on float64 numpy.

Forward/backward passes with relu/linear/softmax activations, inverted
dropout, L2 weight decay, class-weighted cross-entropy and mean-squared-error
losses, an adaptive-moment optimizer, and a finite-difference gradient
checker. No GPU, no mixed precision: desk-scale sizes keep 64-bit cheap and
make gradient checks meaningful.

Class labels are 1-based (severity 1..K) everywhere in the public API.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CacheMismatch,
    DataError,
    LabelOutOfRange,
    NonFiniteActivation,
    ShapeMismatch,
)
from .rng import make_rng

ACTIVATIONS = ("relu", "linear", "softmax")
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class Dense:
    fan_in: int
    fan_out: int
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise DataError(f"unknown activation {self.activation!r}")
        if self.fan_in < 1 or self.fan_out < 1:
            raise DataError("dense layer dimensions must be positive")


@dataclass(frozen=True)
class Dropout:
    rate: float

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0):
            raise DataError(f"dropout rate must be in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    l2_penalty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dense = self.dense_layers()
        if not dense:
            raise DataError("a network needs at least one dense layer")
        for prev, nxt in zip(dense, dense[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ShapeMismatch(
                    f"dense chain broken: fan_out {prev.fan_out} feeds fan_in {nxt.fan_in}"
                )
        for layer in self.layers[:-1]:
            if isinstance(layer, Dense) and layer.activation == "softmax":
                raise DataError("softmax is only valid on the final layer")
        if not isinstance(self.layers[-1], Dense):
            raise DataError("the final layer must be dense")
        if self.l2_penalty < 0:
            raise DataError("l2_penalty must be non-negative")

    def dense_layers(self) -> list[Dense]:
        return [l for l in self.layers if isinstance(l, Dense)]

    @property
    def input_dim(self) -> int:
        return self.dense_layers()[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.dense_layers()[-1].fan_out


@dataclass
class Parameters:
    """Per-dense-layer weight matrices (fan_in x fan_out) and bias vectors."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "Parameters":
        return Parameters([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def n_scalars(self) -> int:
        return sum(a.size for a in self.arrays())


def init_params(spec: NetworkSpec, seed: int = 0) -> Parameters:
    """He-uniform for relu layers (limit sqrt(6/fan_in)), Glorot-uniform
    otherwise (limit sqrt(6/(fan_in+fan_out))); biases start at zero."""
    rng = make_rng(seed)
    weights, biases = [], []
    for layer in spec.dense_layers():
        if layer.activation == "relu":
            limit = np.sqrt(6.0 / layer.fan_in)
        else:
            limit = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        weights.append(rng.uniform(-limit, limit, size=(layer.fan_in, layer.fan_out)))
        biases.append(np.zeros(layer.fan_out))
    return Parameters(weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        return softmax(z)
    return z


@dataclass
class ForwardCache:
    """Everything backward needs: per-layer inputs, pre-activations, and the
    dropout masks actually drawn (already scaled by 1/(1-rate))."""

    mode: str
    dropout_seed: int
    records: list = field(default_factory=list)
    output: np.ndarray | None = None
    n: int = 0


def forward(
    spec: NetworkSpec,
    params: Parameters,
    batch: np.ndarray,
    mode: str = "infer",
    dropout_seed: int = 0,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network; in train mode dropout uses inverted scaling so
    inference is a pure matrix pipeline."""
    if mode not in ("train", "infer"):
        raise DataError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatch("batch must be 2-D")
    if x.shape[1] != spec.input_dim:
        raise ShapeMismatch(f"batch width {x.shape[1]} != network input {spec.input_dim}")
    cache = ForwardCache(mode=mode, dropout_seed=dropout_seed, n=x.shape[0])
    rng = make_rng(dropout_seed) if mode == "train" else None
    dense_idx = 0
    for layer in spec.layers:
        if isinstance(layer, Dense):
            z = x @ params.weights[dense_idx] + params.biases[dense_idx]
            out = _activate(z, layer.activation)
            if out.size and not np.isfinite(out).all():
                raise NonFiniteActivation(f"non-finite activation after dense layer {dense_idx}")
            cache.records.append(("dense", x, z))
            x = out
            dense_idx += 1
        else:
            if mode == "train" and layer.rate > 0.0:
                keep = rng.random(x.shape) >= layer.rate
                scaled_mask = keep / (1.0 - layer.rate)
                x = x * scaled_mask
                cache.records.append(("dropout", scaled_mask))
            else:
                cache.records.append(("dropout", None))
    cache.output = x
    return x, cache


def loss_weighted_ce(probs: np.ndarray, labels: np.ndarray, class_weights: np.ndarray) -> float:
    """Mean of w[y_i] * (-log p_i[y_i]) with probabilities floored at 1e-12.

    The L2 penalty is the training loop's business, not this function's.
    With all weights equal to 1 this is exactly the unweighted cross-entropy.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or len(labels) != probs.shape[0]:
        raise ShapeMismatch("probs must be n x K with one label per row")
    if probs.size and np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
        raise DataError("probability rows must sum to 1")
    k = probs.shape[1]
    if labels.size and ((labels < 1) | (labels > k)).any():
        raise LabelOutOfRange(f"labels must lie in 1..{k}")
    w = np.asarray(class_weights, dtype=np.float64)
    picked = np.maximum(probs[np.arange(len(labels)), labels - 1], PROB_FLOOR)
    return float(np.mean(w[labels - 1] * -np.log(picked)))


def loss_mse(output: np.ndarray, target: np.ndarray) -> float:
    """Mean over all n*d elements of the squared difference."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ShapeMismatch(f"shapes differ: {output.shape} vs {target.shape}")
    return float(np.mean((output - target) ** 2))


def l2_term(spec: NetworkSpec, params: Parameters) -> float:
    """penalty * sum(||W||^2) / 2 over dense weights; biases are exempt."""
    if spec.l2_penalty == 0.0:
        return 0.0
    return spec.l2_penalty * sum(float((w ** 2).sum()) for w in params.weights) / 2.0


def backward(
    spec: NetworkSpec,
    params: Parameters,
    cache: ForwardCache,
    loss_kind: str,
    labels_or_target,
    class_weights: np.ndarray | None = None,
) -> Parameters:
    """Exact gradients of (data loss + L2 term) for every weight and bias.

    The softmax + weighted-cross-entropy gradient is fused at the output:
    (probs - onehot(y)) scaled per row by w[y]/n. Dropout masks are replayed
    from the cache.
    """
    if cache.mode != "train":
        raise CacheMismatch("backward needs a cache from a train-mode forward pass")
    if len(cache.records) != len(spec.layers):
        raise CacheMismatch("cache does not match the network spec")
    dense = spec.dense_layers()
    n = cache.n
    final = dense[-1]

    if loss_kind == "weighted_ce":
        if final.activation != "softmax":
            raise CacheMismatch("weighted_ce requires a softmax output layer")
        labels = np.asarray(labels_or_target)
        k = final.fan_out
        if ((labels < 1) | (labels > k)).any():
            raise LabelOutOfRange(f"labels must lie in 1..{k}")
        w = np.ones(k) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
        probs = cache.output
        delta = probs.copy()
        delta[np.arange(n), labels - 1] -= 1.0
        delta *= (w[labels - 1] / n)[:, None]
        carry = delta  # gradient w.r.t. the final pre-activation
        fused_final = True
    elif loss_kind == "mse":
        if final.activation == "softmax":
            raise CacheMismatch("mse over a softmax output is not supported")
        target = np.asarray(labels_or_target, dtype=np.float64)
        if target.shape != cache.output.shape:
            raise ShapeMismatch("mse target shape differs from network output")
        carry = 2.0 * (cache.output - target) / cache.output.size
        fused_final = False
    else:
        raise DataError(f"unknown loss kind {loss_kind!r}")

    grads = Parameters(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )
    dense_idx = len(dense) - 1
    last_record = len(spec.layers) - 1
    for i in range(last_record, -1, -1):
        record = cache.records[i]
        layer = spec.layers[i]
        if record[0] == "dropout":
            if record[1] is not None:
                carry = carry * record[1]
            continue
        _, x_in, z = record
        if isinstance(layer, Dense):
            if fused_final and i == _last_dense_index(spec):
                dz = carry  # already the pre-activation gradient
            elif layer.activation == "relu":
                dz = carry * (z > 0)
            else:  # linear
                dz = carry
            grads.weights[dense_idx] = x_in.T @ dz + spec.l2_penalty * params.weights[dense_idx]
            grads.biases[dense_idx] = dz.sum(axis=0)
            carry = dz @ params.weights[dense_idx].T
            dense_idx -= 1
    return grads


def _last_dense_index(spec: NetworkSpec) -> int:
    for i in range(len(spec.layers) - 1, -1, -1):
        if isinstance(spec.layers[i], Dense):
            return i
    raise DataError("no dense layer")


@dataclass
class OptimizerState:
    """Adaptive-moment accumulators mirroring the parameter shapes."""

    m: Parameters
    v: Parameters
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_optimizer(params: Parameters, learning_rate: float = 1e-3) -> OptimizerState:
    zeros = Parameters(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )
    return OptimizerState(m=zeros, v=zeros.copy(), learning_rate=learning_rate)


def adam_step(
    params: Parameters, grads: Parameters, state: OptimizerState
) -> tuple[Parameters, OptimizerState]:
    """One bias-corrected adaptive-moment update; returns fresh parameter and
    state objects so callers can keep checkpoints by reference."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params = Parameters([], [])
    new_m = Parameters([], [])
    new_v = Parameters([], [])
    for kind in ("weights", "biases"):
        for p, g, m, v in zip(
            getattr(params, kind), getattr(grads, kind),
            getattr(state.m, kind), getattr(state.v, kind),
        ):
            m_next = b1 * m + (1 - b1) * g
            v_next = b2 * v + (1 - b2) * g * g
            m_hat = m_next / (1 - b1 ** t)
            v_hat = v_next / (1 - b2 ** t)
            getattr(new_params, kind).append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
            getattr(new_m, kind).append(m_next)
            getattr(new_v, kind).append(v_next)
    next_state = OptimizerState(
        m=new_m, v=new_v, step=t,
        learning_rate=state.learning_rate, beta1=state.beta1,
        beta2=state.beta2, eps=state.eps,
    )
    return new_params, next_state


def total_loss(
    spec: NetworkSpec,
    params: Parameters,
    batch: np.ndarray,
    loss_kind: str,
    labels_or_target,
    class_weights: np.ndarray | None = None,
    mode: str = "train",
    dropout_seed: int = 0,
) -> float:
    """Data loss plus L2 term, the quantity backward differentiates."""
    out, _ = forward(spec, params, batch, mode=mode, dropout_seed=dropout_seed)
    if loss_kind == "weighted_ce":
        k = spec.output_dim
        w = np.ones(k) if class_weights is None else np.asarray(class_weights, dtype=np.float64)
        data = loss_weighted_ce(out, labels_or_target, w)
    elif loss_kind == "mse":
        data = loss_mse(out, labels_or_target)
    else:
        raise DataError(f"unknown loss kind {loss_kind!r}")
    return data + l2_term(spec, params)


def gradient_check(
    spec: NetworkSpec,
    params: Parameters,
    batch: np.ndarray,
    loss_kind: str,
    labels_or_target,
    class_weights: np.ndarray | None = None,
    n_coords: int = 200,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over a random sample of parameter coordinates (at least ``n_coords`` when
    the network has that many).

    Dropout masks are replayed from a fixed seed for every evaluation, so the
    check is valid even with active dropout layers; the relative error is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    dropout_seed = seed
    _, cache = forward(spec, params, batch, mode="train", dropout_seed=dropout_seed)
    analytic = backward(spec, params, cache, loss_kind, labels_or_target, class_weights)

    arrays = params.arrays()
    grad_arrays = analytic.arrays()
    sizes = np.array([a.size for a in arrays])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = make_rng(seed)
    chosen = rng.choice(total, size=min(n_coords, total), replace=False)

    def loss_at() -> float:
        return total_loss(
            spec, params, batch, loss_kind, labels_or_target, class_weights,
            mode="train", dropout_seed=dropout_seed,
        )

    worst = 0.0
    for flat in chosen:
        idx = int(np.searchsorted(offsets, flat, side="right") - 1)
        local = int(flat - offsets[idx])
        arr = arrays[idx]
        original = arr.flat[local]
        arr.flat[local] = original + step
        plus = loss_at()
        arr.flat[local] = original - step
        minus = loss_at()
        arr.flat[local] = original
        numeric = (plus - minus) / (2 * step)
        analytic_value = grad_arrays[idx].flat[local]
        rel = abs(analytic_value - numeric) / max(abs(analytic_value), abs(numeric), 1e-8)
        worst = max(worst, rel)
    return worst


# -- model files ---------------------------------------------------------------
#
# One file: a JSON manifest line (spec, meta, format version) followed by a
# little-endian float64 blob of parameters in layer order, each dense layer's
# weight matrix row-major then its bias vector.

MODEL_FORMAT = "sevpred-model-1"


def spec_to_dict(spec: NetworkSpec) -> dict:
    layers = []
    for layer in spec.layers:
        if isinstance(layer, Dense):
            layers.append({
                "type": "dense", "fan_in": layer.fan_in,
                "fan_out": layer.fan_out, "activation": layer.activation,
            })
        else:
            layers.append({"type": "dropout", "rate": layer.rate})
    return {"layers": layers, "l2_penalty": spec.l2_penalty}


def spec_from_dict(obj: dict) -> NetworkSpec:
    layers: list = []
    for entry in obj["layers"]:
        if entry["type"] == "dense":
            layers.append(Dense(entry["fan_in"], entry["fan_out"], entry["activation"]))
        else:
            layers.append(Dropout(entry["rate"]))
    return NetworkSpec(tuple(layers), obj.get("l2_penalty", 0.0))


def save_model(path: str | Path, spec: NetworkSpec, params: Parameters, meta: dict | None = None) -> None:
    manifest = {"format": MODEL_FORMAT, "spec": spec_to_dict(spec), "meta": meta or {}}
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(manifest).encode("utf-8"))
        fh.write(b"\n")
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_model(path: str | Path) -> tuple[NetworkSpec, Parameters, dict]:
    with open(path, "rb") as fh:
        manifest = json.loads(fh.readline().decode("utf-8"))
        if manifest.get("format") != MODEL_FORMAT:
            raise DataError(f"{path}: not a model file")
        blob = fh.read()
    spec = spec_from_dict(manifest["spec"])
    params = Parameters([], [])
    cursor = 0
    data = np.frombuffer(blob, dtype="<f8")
    for layer in spec.dense_layers():
        w_size = layer.fan_in * layer.fan_out
        params.weights.append(data[cursor:cursor + w_size].reshape(layer.fan_in, layer.fan_out).copy())
        cursor += w_size
        params.biases.append(data[cursor:cursor + layer.fan_out].copy())
        cursor += layer.fan_out
    if cursor != data.size:
        raise DataError(f"{path}: parameter blob size does not match the spec")
    return spec, params, manifest.get("meta", {})
