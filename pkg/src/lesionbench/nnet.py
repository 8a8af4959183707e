"""From-scratch dense softmax classifier with weighted cross-entropy.

Stands in for a large CNN at desk scale: optional ReLU hidden layers, a
softmax head, classic (heavy-ball) SGD momentum

    v' = momentum * v - lr * g
    theta' = theta + v'

and Glorot-uniform initialization. Everything is float64 so the gradient
check can be tight. Class weights enter only through the loss; a weight
vector is indexed by target class.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ShapeError, ValidationError

LOG_CLAMP = 1e-12  # probability floor before the log, avoids -inf on confident mistakes


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    num_classes: int = 3

    def layer_dims(self) -> list[tuple[int, int]]:
        """(out, in) shape per layer, input to output."""
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass(frozen=True)
class ModelParams:
    architecture: Architecture
    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        expected = self.architecture.layer_dims()
        if self.architecture.hidden_dims == () and not self.layers:
            # Degenerate zero-parameter model: inputs are the logits.
            if self.architecture.input_dim != self.architecture.num_classes:
                raise ShapeError("a layerless model needs input_dim == num_classes")
            return
        if len(self.layers) != len(expected):
            raise ShapeError(f"expected {len(expected)} layers, got {len(self.layers)}")
        for layer, (out_dim, in_dim) in zip(self.layers, expected):
            if layer.weights.shape != (out_dim, in_dim) or layer.bias.shape != (out_dim,):
                raise ShapeError(
                    f"layer shape {layer.weights.shape}/{layer.bias.shape} does not match "
                    f"architecture {(out_dim, in_dim)}"
                )
            if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
                raise ValidationError("non-finite parameter entries")

    def to_json(self) -> dict:
        return {
            "architecture": {
                "input_dim": self.architecture.input_dim,
                "hidden_dims": list(self.architecture.hidden_dims),
                "num_classes": self.architecture.num_classes,
            },
            "layers": [
                {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
                for layer in self.layers
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        arch = Architecture(
            input_dim=obj["architecture"]["input_dim"],
            hidden_dims=tuple(obj["architecture"]["hidden_dims"]),
            num_classes=obj["architecture"]["num_classes"],
        )
        layers = tuple(
            Layer(
                weights=np.asarray(l["weights"], dtype=np.float64),
                bias=np.asarray(l["bias"], dtype=np.float64),
            )
            for l in obj["layers"]
        )
        return cls(architecture=arch, layers=layers)


@dataclass(frozen=True)
class VelocityState:
    """Momentum buffers, shape-congruent with the parameters."""

    layers: tuple[Layer, ...]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "VelocityState":
        return cls(
            layers=tuple(
                Layer(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in params.layers
            )
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0001
    momentum: float = 0.9
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    class_weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must be in [0, 1)")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be positive")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


def init_params(arch: Architecture, seed: int) -> ModelParams:
    """Glorot-uniform init: U(-s, s) with s = sqrt(6/(fan_in+fan_out))."""
    rng = np.random.default_rng(seed)
    return _init_params_from_rng(arch, rng)


def _init_params_from_rng(arch: Architecture, rng: np.random.Generator) -> ModelParams:
    layers = []
    for out_dim, in_dim in arch.layer_dims():
        s = np.sqrt(6.0 / (in_dim + out_dim))
        layers.append(
            Layer(
                weights=rng.uniform(-s, s, size=(out_dim, in_dim)),
                bias=np.zeros(out_dim),
            )
        )
    return ModelParams(architecture=arch, layers=tuple(layers))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def _forward_batch(params: ModelParams, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns per-layer activations (inputs first) and softmax probabilities."""
    activations = [X]
    a = X
    n_layers = len(params.layers)
    for i, layer in enumerate(params.layers):
        z = a @ layer.weights.T + layer.bias
        a = z if i == n_layers - 1 else np.maximum(z, 0.0)
        activations.append(a)
    logits = activations[-1]
    return activations, _softmax_rows(logits)


def forward(params: ModelParams, x: Sequence[float]) -> np.ndarray:
    """Class-probability vector for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.architecture.input_dim:
        raise ShapeError(
            f"input of length {x.shape} does not match input_dim={params.architecture.input_dim}"
        )
    if not np.isfinite(x).all():
        raise ValidationError("non-finite input entries")
    _, probs = _forward_batch(params, x[None, :])
    return probs[0]


def weighted_cross_entropy(
    probs: np.ndarray, target: int, weights: Sequence[float] | None = None
) -> float:
    """w(target) * (-ln probs[target]), probability clamped below at 1e-12."""
    w = 1.0 if weights is None else float(weights[target])
    return float(w * -np.log(max(float(probs[target]), LOG_CLAMP)))


def batch_loss(
    params: ModelParams,
    batch: Sequence[tuple[Sequence[float], int]],
    weights: Sequence[float] | None = None,
) -> float:
    """Mean weighted cross-entropy over the batch."""
    X, y = _as_arrays(params, batch)
    _, probs = _forward_batch(params, X)
    p_target = np.clip(probs[np.arange(len(y)), y], LOG_CLAMP, None)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)[y]
    return float(np.mean(w * -np.log(p_target)))


def gradient(
    params: ModelParams,
    batch: Sequence[tuple[Sequence[float], int]],
    weights: Sequence[float] | None = None,
) -> tuple[Layer, ...]:
    """Mean gradient of weighted cross-entropy over the batch, per layer."""
    X, y = _as_arrays(params, batch)
    n = len(y)
    activations, probs = _forward_batch(params, X)

    # Softmax+CE shortcut: dL/dlogits = w * (p - onehot) per sample, then mean.
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)[y]
    delta *= (w / n)[:, None]

    grads: list[Layer] = []
    for i in range(len(params.layers) - 1, -1, -1):
        a_in = activations[i]
        grads.append(Layer(weights=delta.T @ a_in, bias=delta.sum(axis=0)))
        if i > 0:
            delta = delta @ params.layers[i].weights
            delta *= activations[i] > 0  # ReLU mask on the hidden activation
    grads.reverse()
    return tuple(grads)


def _as_arrays(
    params: ModelParams, batch: Sequence[tuple[Sequence[float], int]]
) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ValidationError("empty batch")
    X = np.asarray([np.asarray(x, dtype=np.float64) for x, _ in batch])
    y = np.asarray([t for _, t in batch], dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != params.architecture.input_dim:
        raise ShapeError(
            f"batch feature shape {X.shape} does not match input_dim="
            f"{params.architecture.input_dim}"
        )
    if (y < 0).any() or (y >= params.architecture.num_classes).any():
        raise ValidationError("target class out of range")
    return X, y


def sgd_momentum_step(
    params: ModelParams,
    velocity: VelocityState,
    grads: Sequence[Layer],
    lr: float,
    momentum: float,
) -> tuple[ModelParams, VelocityState]:
    """One classic-momentum update; returns fresh params and velocity."""
    if len(grads) != len(params.layers) or len(velocity.layers) != len(params.layers):
        raise ShapeError("gradient/velocity layer count mismatch")
    new_layers = []
    new_velocity = []
    for layer, vel, grad in zip(params.layers, velocity.layers, grads):
        if grad.weights.shape != layer.weights.shape or grad.bias.shape != layer.bias.shape:
            raise ShapeError("gradient shape mismatch")
        vw = momentum * vel.weights - lr * grad.weights
        vb = momentum * vel.bias - lr * grad.bias
        new_velocity.append(Layer(vw, vb))
        new_layers.append(Layer(layer.weights + vw, layer.bias + vb))
    return (
        replace(params, layers=tuple(new_layers)),
        VelocityState(layers=tuple(new_velocity)),
    )


def _dataset_metrics(
    params: ModelParams,
    data: Sequence[tuple[Sequence[float], int]],
    weights: Sequence[float] | None,
) -> tuple[float, float]:
    X, y = _as_arrays(params, data)
    _, probs = _forward_batch(params, X)
    p_target = np.clip(probs[np.arange(len(y)), y], LOG_CLAMP, None)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)[y]
    loss = float(np.mean(w * -np.log(p_target)))
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc


def train(
    train_data: Sequence[tuple[Sequence[float], int]],
    val_data: Sequence[tuple[Sequence[float], int]],
    config: TrainConfig,
    arch: Architecture | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Minibatch SGD+momentum training, deterministic for a fixed seed.

    One PRNG stream (seeded from the config) drives initialization and the
    per-epoch reshuffles. History records full-pass train/validation loss
    and accuracy after each epoch; both losses use the configured class
    weights.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValidationError("train and validation views must be non-empty")
    if arch is None:
        input_dim = len(train_data[0][0])
        num_classes = 1 + max(t for _, t in [*train_data, *val_data])
        arch = Architecture(input_dim=input_dim, num_classes=num_classes)

    rng = np.random.default_rng(config.seed)
    params = _init_params_from_rng(arch, rng)
    velocity = VelocityState.zeros_like(params)
    weights = config.class_weights
    history = TrainHistory()

    X, y = _as_arrays(params, train_data)
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = [(X[i], int(y[i])) for i in idx]
            grads = gradient(params, batch, weights)
            params, velocity = sgd_momentum_step(
                params, velocity, grads, config.learning_rate, config.momentum
            )
        train_loss, train_acc = _dataset_metrics(params, train_data, weights)
        val_loss, val_acc = _dataset_metrics(params, val_data, weights)
        history.train_loss.append(train_loss)
        history.train_accuracy.append(train_acc)
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
    return params, history


def predict(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Argmax class per row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.architecture.input_dim:
        raise ShapeError(f"feature matrix shape {X.shape} does not match model input")
    _, probs = _forward_batch(params, X)
    return probs.argmax(axis=1)


def finite_difference_check(
    params: ModelParams,
    batch: Sequence[tuple[Sequence[float], int]],
    weights: Sequence[float] | None = None,
    h: float = 1e-6,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Relative error per parameter is |a - n| / max(1e-8, |a| + |n|); a model
    with no parameters returns 0.
    """
    if h <= 0:
        raise ValidationError("h must be positive")
    analytic = gradient(params, batch, weights) if params.layers else ()
    max_err = 0.0
    for li, layer in enumerate(params.layers):
        for attr in ("weights", "bias"):
            array = getattr(layer, attr)
            grad_array = getattr(analytic[li], attr)
            for idx in np.ndindex(array.shape):
                orig = array[idx]
                array[idx] = orig + h
                loss_plus = batch_loss(params, batch, weights)
                array[idx] = orig - h
                loss_minus = batch_loss(params, batch, weights)
                array[idx] = orig
                numeric = (loss_plus - loss_minus) / (2 * h)
                a = float(grad_array[idx])
                err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                max_err = max(max_err, err)
    return max_err
