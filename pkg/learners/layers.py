"""Dense layer stacks with hand-written backprop, shared by the autoencoder and OC-NN."""
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from shared.errors import ConfigError, ShapeError
from shared.numerics import Activation, ensure_finite, glorot_init


@dataclass
class DenseLayer:
    """z = X W^T + b, a = g(z). W is (out_dim, in_dim); bias is None for bias-free layers."""
    weight: np.ndarray
    bias: Optional[np.ndarray]
    activation: Activation

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    def validate(self) -> list[str]:
        errors = []
        if self.weight.ndim != 2:
            errors.append(f"layer weight must be 2-D, got shape {self.weight.shape}")
        elif self.bias is not None and self.bias.shape != (self.out_dim,):
            errors.append(f"layer bias shape {self.bias.shape} != ({self.out_dim},)")
        if not np.all(np.isfinite(self.weight)):
            errors.append("layer weight has non-finite entries")
        errors.extend(self.activation.validate())
        return errors

    def forward(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if X.shape[1] != self.in_dim:
            raise ShapeError("dense layer input", X.shape, self.weight.shape)
        Z = X @ self.weight.T
        if self.bias is not None:
            Z = Z + self.bias
        return Z, self.activation(Z)

    def copy(self) -> "DenseLayer":
        return DenseLayer(
            self.weight.copy(),
            None if self.bias is None else self.bias.copy(),
            self.activation,
        )


@dataclass
class LayerCache:
    inputs: np.ndarray
    z: np.ndarray
    a: np.ndarray


@dataclass
class LayerGrad:
    weight: np.ndarray
    bias: Optional[np.ndarray]


def init_layer(in_dim: int, out_dim: int, activation: Activation, seed: int, stream: str,
               gain: float = 1.0, with_bias: bool = True) -> DenseLayer:
    """Glorot weights, zero bias."""
    weight = glorot_init(out_dim, in_dim, seed, gain=gain, stream=stream)
    bias = np.zeros(out_dim) if with_bias else None
    return DenseLayer(weight, bias, activation)


def check_chain(layers: Sequence[DenseLayer], input_dim: int) -> int:
    """Raise ShapeError unless layer widths chain from input_dim; returns the output width."""
    width = input_dim
    for i, layer in enumerate(layers):
        errors = layer.validate()
        if errors:
            raise ConfigError([f"layer {i}: {e}" for e in errors])
        if layer.in_dim != width:
            raise ShapeError(f"layer {i} input", (width,), (layer.in_dim,))
        width = layer.out_dim
    return width


def forward_stack(layers: Sequence[DenseLayer], X: np.ndarray) -> tuple[np.ndarray, list[LayerCache]]:
    caches = []
    h = X
    for layer in layers:
        z, a = layer.forward(h)
        caches.append(LayerCache(h, z, a))
        h = a
    return h, caches


def stack_output(layers: Sequence[DenseLayer], X: np.ndarray) -> np.ndarray:
    h = X
    for layer in layers:
        _, h = layer.forward(h)
    return ensure_finite(h, "layer stack output")


def backward_stack(layers: Sequence[DenseLayer], caches: Sequence[LayerCache],
                   d_out: np.ndarray) -> tuple[list[LayerGrad], np.ndarray]:
    """Given dL/d(output), return per-layer (dW, db) and dL/d(input)."""
    grads: list[LayerGrad] = [None] * len(layers)  # type: ignore[list-item]
    delta = d_out
    for i in range(len(layers) - 1, -1, -1):
        layer, cache = layers[i], caches[i]
        dz = delta * layer.activation.derivative(cache.z, cache.a)
        dW = dz.T @ cache.inputs
        db = dz.sum(axis=0) if layer.bias is not None else None
        grads[i] = LayerGrad(dW, db)
        delta = dz @ layer.weight
    return grads, delta


def weight_norm_sq(layers: Sequence[DenseLayer]) -> float:
    return float(sum(np.sum(layer.weight * layer.weight) for layer in layers))


def flatten_params(layers: Sequence[DenseLayer]) -> np.ndarray:
    """Weights then biases, layer by layer."""
    parts = []
    for layer in layers:
        parts.append(layer.weight.ravel())
        if layer.bias is not None:
            parts.append(layer.bias.ravel())
    return np.concatenate(parts) if parts else np.empty(0)


def flatten_grads(grads: Sequence[LayerGrad]) -> np.ndarray:
    parts = []
    for g in grads:
        parts.append(g.weight.ravel())
        if g.bias is not None:
            parts.append(g.bias.ravel())
    return np.concatenate(parts) if parts else np.empty(0)


def unflatten_params(layers: Sequence[DenseLayer], theta: np.ndarray) -> list[DenseLayer]:
    """New layers with the same shapes and activations, values taken from theta."""
    theta = np.asarray(theta, dtype=np.float64)
    expected = sum(l.weight.size + (l.bias.size if l.bias is not None else 0) for l in layers)
    if theta.ndim != 1 or theta.size != expected:
        raise ShapeError("unflatten_params", theta.shape, (expected,))
    out = []
    pos = 0
    for layer in layers:
        n = layer.weight.size
        weight = theta[pos:pos + n].reshape(layer.weight.shape).copy()
        pos += n
        bias = None
        if layer.bias is not None:
            bias = theta[pos:pos + layer.out_dim].copy()
            pos += layer.out_dim
        out.append(DenseLayer(weight, bias, layer.activation))
    return out
