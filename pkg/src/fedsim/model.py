"""Fully connected classifier over a flat parameter vector.

The whole model lives in one float64 array so that aggregation, noise
perturbation and masking can treat it as plain numbers. Layout: for each
layer, the weight matrix (n_in x n_out, C order) followed by its bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Layer widths, input first, class count last. Hidden units are rectified."""

    layer_sizes: tuple[int, ...] = (784, 64, 10)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ConfigError("model.layer_sizes: need at least input and output layer")
        if any(s < 1 for s in sizes):
            raise ConfigError("model.layer_sizes: all sizes must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    @property
    def dimension(self) -> int:
        """Total parameter count: sum of (n_in + 1) * n_out over layers."""
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))


def init_params(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Glorot-uniform weights, zero biases, drawn from ``rng``."""
    chunks = []
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (n_in + n_out))
        chunks.append(rng.uniform(-bound, bound, size=n_in * n_out))
        chunks.append(np.zeros(n_out))
    return np.concatenate(chunks)


def unpack(params: np.ndarray, spec: ModelSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of (W, b) per layer; no copies."""
    if params.shape != (spec.dimension,):
        raise ConfigError(
            f"parameter vector has length {params.shape}, model needs ({spec.dimension},)"
        )
    out = []
    offset = 0
    sizes = spec.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = params[offset : offset + n_in * n_out].reshape(n_in, n_out)
        offset += n_in * n_out
        b = params[offset : offset + n_out]
        offset += n_out
        out.append((w, b))
    return out


def _check_batch(spec: ModelSpec, inputs: np.ndarray, labels: np.ndarray) -> None:
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ConfigError(
            f"batch inputs shaped {inputs.shape}, model expects (b, {spec.input_dim})"
        )
    if labels.shape != (inputs.shape[0],):
        raise ConfigError("batch labels must be one class index per input row")
    if inputs.shape[0] < 1:
        raise ConfigError("batch must contain at least one example")


def _forward(params, spec, inputs):
    """Returns (pre-activations per layer, activations per layer, probs)."""
    layers = unpack(params, spec)
    a = inputs
    zs, acts = [], [a]
    for w, b in layers[:-1]:
        z = a @ w + b
        zs.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    w, b = layers[-1]
    logits = a @ w + b
    zs.append(logits)
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return zs, acts, probs


def forward_loss(
    params: np.ndarray, spec: ModelSpec, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and per-row class probabilities.

    Probabilities are floored at 1e-12 inside the log so a confidently wrong
    prediction cannot produce an infinite loss.
    """
    _check_batch(spec, inputs, labels)
    _, _, probs = _forward(params, spec, inputs)
    p_true = probs[np.arange(len(labels)), labels]
    loss = float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))
    if not math.isfinite(loss):
        raise NumericError("non-finite loss in forward pass")
    return loss, probs


def _grad_from_forward(spec, zs, acts, probs, labels, params_like):
    b = len(labels)
    rows = np.arange(b)
    g = probs.copy()
    g[rows, labels] -= 1.0
    # Examples sitting on the probability floor contribute a flat (zero) slope.
    g[probs[rows, labels] <= PROB_FLOOR] = 0.0
    g /= b

    grad = np.empty_like(params_like)
    layers = unpack(grad, spec)
    weights = unpack(params_like, spec)
    for idx in range(len(layers) - 1, -1, -1):
        gw, gb = layers[idx]
        np.matmul(acts[idx].T, g, out=gw)
        g.sum(axis=0, out=gb)
        if idx > 0:
            g = (g @ weights[idx][0].T) * (zs[idx - 1] > 0.0)
    return grad


def backward(
    params: np.ndarray, spec: ModelSpec, inputs: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Exact gradient of forward_loss with respect to every parameter."""
    _check_batch(spec, inputs, labels)
    zs, acts, probs = _forward(params, spec, inputs)
    grad = _grad_from_forward(spec, zs, acts, probs, labels, params)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient in backward pass")
    return grad


def loss_and_grad(
    params: np.ndarray, spec: ModelSpec, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """One shared forward pass for the SGD inner loop."""
    _check_batch(spec, inputs, labels)
    zs, acts, probs = _forward(params, spec, inputs)
    p_true = probs[np.arange(len(labels)), labels]
    loss = float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))
    if not math.isfinite(loss):
        raise NumericError("non-finite loss in forward pass")
    return loss, _grad_from_forward(spec, zs, acts, probs, labels, params)


def sgd_step(params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    if params.shape != grad.shape:
        raise ConfigError("gradient length does not match parameter vector")
    return params - lr * grad


def evaluate(
    params: np.ndarray,
    spec: ModelSpec,
    inputs: np.ndarray,
    labels: np.ndarray,
    chunk: int = 4096,
) -> tuple[float, float]:
    """(accuracy, mean loss) over a full dataset, evaluated in chunks.

    Argmax ties resolve to the lowest class index, so results are deterministic.
    """
    n = len(labels)
    if n == 0:
        raise ConfigError("evaluate: dataset is empty")
    correct = 0
    loss_sum = 0.0
    for start in range(0, n, chunk):
        x = inputs[start : start + chunk]
        y = labels[start : start + chunk]
        loss, probs = forward_loss(params, spec, x, y)
        loss_sum += loss * len(y)
        correct += int(np.sum(np.argmax(probs, axis=1) == y))
    return correct / n, loss_sum / n
