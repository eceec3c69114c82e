"""Dense feed-forward networks with exact input gradients.

Logistic and linear regression are the zero-hidden-layer special case.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, TrainingError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity", "sigmoid", "softmax")


def _sigmoid(z):
    # split on sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softmax(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "identity":
        return z.copy()
    if name == "sigmoid":
        return _sigmoid(z)
    if name == "softmax":
        return _softmax(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class LayerSpec:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "relu"

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise DimensionError(f"weight must be 2-D, got shape {w.shape}")
        if w.shape[0] != b.shape[0]:
            raise DimensionError(
                f"weight has {w.shape[0]} rows but bias has length {b.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class MlpModel:
    layers: tuple
    task: str = "classification"

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("an MLP needs at least one layer")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        for k in range(len(layers) - 1):
            if layers[k].out_dim != layers[k + 1].in_dim:
                raise DimensionError(
                    f"layer {k} outputs {layers[k].out_dim} but layer {k + 1} "
                    f"expects {layers[k + 1].in_dim}")
            if layers[k].activation == "softmax":
                raise ValueError("softmax is only allowed on the final layer")
        last = layers[-1].activation
        if self.task == "classification" and last not in ("softmax", "sigmoid"):
            raise ValueError("classification models must end in softmax or sigmoid")
        if self.task == "regression" and last != "identity":
            raise ValueError("regression models must end in identity")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def kind(self) -> str:
        return "mlp"

    def predict(self, x):
        return forward(self, x)


@dataclass
class ForwardTrace:
    pre_activations: list = field(default_factory=list)
    activations: list = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]

    def __len__(self):
        return len(self.activations)


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0
    hidden_activation: str = "relu"
    # forest settings
    n_trees: int = 50
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not self.init_scale > 0:
            raise ValueError("init scale must be positive")
        for name in ("epochs", "batch_size", "n_trees", "min_leaf"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")


def _check_input(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim or x.ndim not in (1, 2):
        raise DimensionError(
            f"model expects {model.input_dim} features, got shape {x.shape}")
    return x


def forward(model: MlpModel, x) -> np.ndarray:
    """Output of the network for one input (1-D) or a batch of rows (2-D)."""
    a = _check_input(model, x)
    for layer in model.layers:
        a = apply_activation(layer.activation, a @ layer.weight.T + layer.bias)
    return a


def forward_trace(model: MlpModel, x) -> ForwardTrace:
    a = _check_input(model, x)
    trace = ForwardTrace()
    for layer in model.layers:
        z = a @ layer.weight.T + layer.bias
        a = apply_activation(layer.activation, z)
        trace.pre_activations.append(z)
        trace.activations.append(a)
    return trace


def target_score(model: MlpModel, x, target: int):
    """Pre-activation of the final layer at `target` (the logit for classifiers)."""
    trace = forward_trace(model, x)
    return trace.pre_activations[-1][..., target]


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(np.float64)
    if name == "identity":
        return np.ones_like(z)
    if name == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"elementwise derivative undefined for {name!r}")


def gradient_wrt_input(model: MlpModel, x, target: int) -> np.ndarray:
    """d(final pre-activation[target]) / dx by backpropagation.

    Accepts a single input or a batch; the result has the same shape as x.
    """
    if not 0 <= target < model.output_dim:
        raise IndexError(f"target {target} out of range for {model.output_dim} outputs")
    x = _check_input(model, x)
    trace = forward_trace(model, x)
    delta = np.zeros_like(trace.pre_activations[-1])
    delta[..., target] = 1.0
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        if k < len(model.layers) - 1:
            delta = delta * _activation_grad(
                layer.activation, trace.pre_activations[k], trace.activations[k])
        delta = delta @ layer.weight
    return delta


def init_mlp(sizes, task: str, cfg: TrainConfig, n_outputs: int) -> MlpModel:
    """Seeded uniform init in [-s, s] with s = init_scale / sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(cfg.seed)
    dims = [sizes[0], *sizes[1:], n_outputs]
    layers = []
    for k in range(len(dims) - 1):
        fan_in, fan_out = dims[k], dims[k + 1]
        s = cfg.init_scale / np.sqrt(fan_in)
        w = rng.uniform(-s, s, size=(fan_out, fan_in))
        last = k == len(dims) - 2
        if not last:
            act = cfg.hidden_activation
        else:
            act = "softmax" if task == "classification" else "identity"
        layers.append(LayerSpec(w, np.zeros(fan_out), act))
    return MlpModel(tuple(layers), task)


def train_mlp(data, hidden=(), cfg: TrainConfig | None = None) -> MlpModel:
    """Fit an MLP with plain mini-batch SGD.

    Classification uses softmax cross-entropy over ``data.n_classes`` outputs,
    regression uses squared error on a single output. ``hidden=()`` gives
    multinomial logistic (or linear) regression.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.targets)
    if X.shape[0] == 0:
        raise TrainingError("cannot train on an empty dataset")
    if X.shape[0] != y.shape[0]:
        raise DimensionError("features and targets disagree on row count")
    task = data.task
    if task == "classification":
        n_out = data.n_classes
        onehot = np.zeros((len(y), n_out))
        onehot[np.arange(len(y)), y.astype(int)] = 1.0
        Y = onehot
    else:
        n_out = 1
        Y = y.astype(np.float64).reshape(-1, 1)

    model = init_mlp([X.shape[1], *hidden], task, cfg, n_out)
    if cfg.epochs == 0:
        return model
    weights = [np.array(layer.weight) for layer in model.layers]
    biases = [np.array(layer.bias) for layer in model.layers]
    acts = [layer.activation for layer in model.layers]
    rng = np.random.default_rng(cfg.seed + 1)
    n = X.shape[0]
    bs = max(1, min(cfg.batch_size or n, n))

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            xb, yb = X[idx], Y[idx]
            zs, as_ = [], [xb]
            a = xb
            for w, b, act in zip(weights, biases, acts):
                z = a @ w.T + b
                a = apply_activation(act, z)
                zs.append(z)
                as_.append(a)
            m = len(idx)
            if task == "classification":
                total += -np.sum(yb * np.log(np.clip(a, 1e-300, None)))
            else:
                total += 0.5 * np.sum((a - yb) ** 2)
            # softmax+CE and identity+MSE share the same output delta
            delta = (a - yb) / m
            for k in range(len(weights) - 1, -1, -1):
                gw = delta.T @ as_[k]
                gb = delta.sum(axis=0)
                if k > 0:
                    delta = (delta @ weights[k]) * _activation_grad(acts[k - 1], zs[k - 1], as_[k])
                weights[k] -= cfg.learning_rate * gw
                biases[k] -= cfg.learning_rate * gb
        if not np.isfinite(total):
            raise TrainingError(f"loss became non-finite at epoch {epoch}")
        logger.debug("epoch %d loss %.6g", epoch, total / n)

    layers = tuple(LayerSpec(w, b, act) for w, b, act in zip(weights, biases, acts))
    return MlpModel(layers, task)
