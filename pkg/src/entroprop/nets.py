"""Minimal deterministic feed-forward networks with hand-coded backprop.

Layers are declarative dataclasses; weights live in plain numpy arrays.
Supported pieces are exactly what the experiments need: dense layers,
valid 2-d convolutions, 2x2 max pooling, sigmoid / leaky-ReLU / softmax
activations, and MSE / cross-entropy base losses.  Everything is
float64 and bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError

LEAKY_SLOPE = 0.01

ACTIVATION_KINDS = ("sigmoid", "leaky_relu", "softmax")


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class Conv2D:
    filters: int
    in_channels: int
    height: int
    width: int


@dataclass(frozen=True)
class MaxPool2:
    pass


@dataclass(frozen=True)
class Activation:
    kind: str

    def __post_init__(self):
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}")


@dataclass
class LayerParams:
    """Trainable arrays of one layer; `w` is (out,in) or (f,c,p,q)."""

    w: np.ndarray
    b: np.ndarray

    def copy(self) -> "LayerParams":
        return LayerParams(self.w.copy(), self.b.copy())


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list; dense layers auto-flatten 4-d inputs."""

    layers: tuple

    def conv_positions(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if isinstance(l, Conv2D)]

    def dense_positions(self) -> list[int]:
        return [i for i, l in enumerate(self.layers) if isinstance(l, Dense)]


def init_weights(spec: NetworkSpec, rng: np.random.Generator,
                 scale: float = 1.0) -> list[Optional[LayerParams]]:
    """Fan-based uniform (Glorot) initialization, zero biases.

    `scale` multiplies the standard limit sqrt(6 / (fan_in + fan_out)).
    """
    params: list[Optional[LayerParams]] = []
    for layer in spec.layers:
        if isinstance(layer, Dense):
            limit = scale * np.sqrt(6.0 / (layer.in_dim + layer.out_dim))
            w = rng.uniform(-limit, limit, size=(layer.out_dim, layer.in_dim))
            params.append(LayerParams(w, np.zeros(layer.out_dim)))
        elif isinstance(layer, Conv2D):
            fan_in = layer.in_channels * layer.height * layer.width
            fan_out = layer.filters * layer.height * layer.width
            limit = scale * np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(
                -limit, limit,
                size=(layer.filters, layer.in_channels, layer.height, layer.width),
            )
            params.append(LayerParams(w, np.zeros(layer.filters)))
        else:
            params.append(None)
    return params


def _conv_cols(x: np.ndarray, p: int, q: int) -> tuple[np.ndarray, int, int]:
    """im2col: (B,C,H,W) -> (B*oh*ow, C*p*q) patch matrix."""
    b, c, h, w = x.shape
    oh, ow = h - p + 1, w - q + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (p, q), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * oh * ow, c * p * q)
    return cols, oh, ow


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(spec: NetworkSpec, weights: Sequence, x: np.ndarray):
    """Evaluate the network on a batch.

    Returns ``(cache, out)``; the cache stores whatever backprop needs
    (layer inputs, pre-activations, pooling argmaxes, flatten shapes).
    """
    cache = []
    for idx, (layer, params) in enumerate(zip(spec.layers, weights)):
        entry = {"input_shape": x.shape}
        if isinstance(layer, Dense):
            if x.ndim == 4:
                x = x.reshape(x.shape[0], -1)
            if x.ndim != 2 or x.shape[1] != layer.in_dim:
                raise DimensionError(
                    f"layer {idx}: expected {layer.in_dim} features, got {x.shape}"
                )
            entry["x"] = x
            x = x @ params.w.T + params.b
        elif isinstance(layer, Conv2D):
            if x.ndim != 4 or x.shape[1] != layer.in_channels:
                raise DimensionError(
                    f"layer {idx}: expected (B,{layer.in_channels},H,W), got {x.shape}"
                )
            if layer.height > x.shape[2] or layer.width > x.shape[3]:
                raise DimensionError(f"layer {idx}: filter larger than input")
            cols, oh, ow = _conv_cols(x, layer.height, layer.width)
            entry["cols"] = cols
            z = cols @ params.w.reshape(layer.filters, -1).T + params.b
            x = z.reshape(x.shape[0], oh, ow, layer.filters).transpose(0, 3, 1, 2)
        elif isinstance(layer, MaxPool2):
            if x.ndim != 4:
                raise DimensionError(f"layer {idx}: pooling expects 4-d input")
            b, c, h, w = x.shape
            h2, w2 = h // 2, w // 2
            if h2 == 0 or w2 == 0:
                raise DimensionError(f"layer {idx}: input {h}x{w} too small to pool")
            blocks = (
                x[:, :, : 2 * h2, : 2 * w2]
                .reshape(b, c, h2, 2, w2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(b, c, h2, w2, 4)
            )
            arg = np.argmax(blocks, axis=4)
            entry["arg"] = arg
            x = np.take_along_axis(blocks, arg[..., None], axis=4)[..., 0]
        elif isinstance(layer, Activation):
            if layer.kind == "sigmoid":
                x = sigmoid(x)
                entry["out"] = x
            elif layer.kind == "leaky_relu":
                entry["z"] = x
                x = np.where(x > 0, x, LEAKY_SLOPE * x)
            else:  # softmax
                if x.ndim != 2:
                    raise DimensionError(f"layer {idx}: softmax expects 2-d input")
                x = softmax(x)
                entry["out"] = x
        else:
            raise DimensionError(f"layer {idx}: unsupported layer {layer!r}")
        cache.append(entry)
    return cache, x


def backward(spec: NetworkSpec, weights: Sequence, cache: Sequence,
             out_grad: np.ndarray, entropy_grads: Optional[dict] = None):
    """Gradients of a scalar loss w.r.t. every parameter.

    ``out_grad`` is dLoss/d(network output).  ``entropy_grads`` maps a
    layer position to an array added to that layer's weight gradient,
    which is how the additive entropy loss terms enter the chain.
    """
    if len(cache) != len(spec.layers):
        raise DimensionError("cache does not match network spec")
    grads: list[Optional[LayerParams]] = [None] * len(spec.layers)
    g = out_grad
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        params = weights[idx]
        entry = cache[idx]
        if isinstance(layer, Dense):
            x = entry["x"]
            gw = g.T @ x
            gb = g.sum(axis=0)
            g = g @ params.w
            if len(entry["input_shape"]) == 4:
                g = g.reshape(entry["input_shape"])
            grads[idx] = LayerParams(gw, gb)
        elif isinstance(layer, Conv2D):
            b, c, h, w = entry["input_shape"]
            p, q = layer.height, layer.width
            oh, ow = h - p + 1, w - q + 1
            dz = g.transpose(0, 2, 3, 1).reshape(b * oh * ow, layer.filters)
            gw = (dz.T @ entry["cols"]).reshape(layer.filters, c, p, q)
            gb = dz.sum(axis=0)
            dzp = np.zeros((b, layer.filters, oh + 2 * (p - 1), ow + 2 * (q - 1)))
            dzp[:, :, p - 1 : p - 1 + oh, q - 1 : q - 1 + ow] = g
            cols2, _, _ = _conv_cols(dzp, p, q)
            kernel_fl = params.w[:, :, ::-1, ::-1].transpose(0, 2, 3, 1)
            g = (cols2 @ kernel_fl.reshape(layer.filters * p * q, c)).reshape(
                b, h, w, c
            ).transpose(0, 3, 1, 2)
            grads[idx] = LayerParams(gw, gb)
        elif isinstance(layer, MaxPool2):
            b, c, h, w = entry["input_shape"]
            h2, w2 = h // 2, w // 2
            arg = entry["arg"]
            blocks = np.zeros((b, c, h2, w2, 4))
            np.put_along_axis(blocks, arg[..., None], g[..., None], axis=4)
            gx = np.zeros((b, c, h, w))
            gx[:, :, : 2 * h2, : 2 * w2] = (
                blocks.reshape(b, c, h2, w2, 2, 2)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(b, c, 2 * h2, 2 * w2)
            )
            g = gx
        elif isinstance(layer, Activation):
            if layer.kind == "sigmoid":
                s = entry["out"]
                g = g * s * (1.0 - s)
            elif layer.kind == "leaky_relu":
                g = g * np.where(entry["z"] > 0, 1.0, LEAKY_SLOPE)
            else:  # softmax
                p = entry["out"]
                g = p * (g - (g * p).sum(axis=-1, keepdims=True))
    if entropy_grads:
        for idx, extra in entropy_grads.items():
            if grads[idx] is None:
                raise DimensionError(f"layer {idx} has no trainable weights")
            grads[idx].w = grads[idx].w + extra
    return grads


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all elements and its gradient."""
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def cross_entropy_loss(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of integer labels and its gradient."""
    n = probs.shape[0]
    if labels.shape != (n,):
        raise DimensionError(f"labels shape {labels.shape} does not match batch {n}")
    p_true = np.maximum(probs[np.arange(n), labels], 1e-300)
    grad = np.zeros_like(probs)
    grad[np.arange(n), labels] = -1.0 / (p_true * n)
    return float(-np.mean(np.log(p_true))), grad


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(np.argmax(probs, axis=1) == labels))
