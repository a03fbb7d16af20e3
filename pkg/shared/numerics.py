"""Dense numerics shared by every learner.

Matrices are float64 numpy arrays, row-major, one instance per row.
Randomness always goes through make_rng(seed, stream): a PCG64 generator
whose SeedSequence is keyed by the user seed plus a CRC32 of the consumer
name, so every consumer ("ocnn.V", "synthetic.test", ...) draws from its own
stream and adding a consumer never shifts another one's numbers.
"""
from __future__ import annotations
import math
import re
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from shared.errors import ConfigError, NumericalError, ShapeError

ACT_LINEAR = "linear"
ACT_SIGMOID = "sigmoid"
ACT_RELU = "relu"
ACT_LEAKY_RELU = "leaky_relu"

VALID_ACTIVATIONS = {ACT_LINEAR, ACT_SIGMOID, ACT_RELU, ACT_LEAKY_RELU}

_LEAKY_RE = re.compile(r"^leaky_relu\(\s*([0-9.eE+-]+)\s*\)$")


@dataclass(frozen=True)
class Activation:
    kind: str = ACT_LINEAR
    alpha: float = 0.1  # leaky_relu slope for z < 0, ignored otherwise

    def validate(self) -> list[str]:
        errors = []
        if self.kind not in VALID_ACTIVATIONS:
            errors.append(f"Unknown activation '{self.kind}'")
        if self.kind == ACT_LEAKY_RELU and not (self.alpha > 0 and math.isfinite(self.alpha)):
            errors.append(f"leaky_relu slope must be > 0, got {self.alpha}")
        return errors

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == ACT_LINEAR:
            return np.array(z, dtype=np.float64, copy=True)
        if self.kind == ACT_SIGMOID:
            return expit(z)
        if self.kind == ACT_RELU:
            return np.maximum(z, 0.0)
        return np.where(z > 0, z, self.alpha * z)

    def derivative(self, z: np.ndarray, a: np.ndarray | None = None) -> np.ndarray:
        """dg/dz at z; `a` may carry g(z) already computed (saves a sigmoid)."""
        if self.kind == ACT_LINEAR:
            return np.ones_like(z, dtype=np.float64)
        if self.kind == ACT_SIGMOID:
            s = expit(z) if a is None else a
            return s * (1.0 - s)
        if self.kind == ACT_RELU:
            return np.where(z > 0, 1.0, 0.0)
        return np.where(z > 0, 1.0, self.alpha)

    def __str__(self) -> str:
        if self.kind == ACT_LEAKY_RELU:
            return f"leaky_relu({self.alpha!r})"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Activation":
        """Accepts 'linear', 'sigmoid', 'relu', 'leaky_relu' or 'leaky_relu(0.1)'."""
        text = text.strip()
        m = _LEAKY_RE.match(text)
        if m:
            act = cls(ACT_LEAKY_RELU, float(m.group(1)))
        else:
            act = cls(text)
        errors = act.validate()
        if errors:
            raise ConfigError(errors)
        return act


LINEAR = Activation(ACT_LINEAR)
SIGMOID = Activation(ACT_SIGMOID)
LEAKY_RELU = Activation(ACT_LEAKY_RELU, 0.1)


def ensure_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{what}: non-finite values")
    return arr


def as_matrix(values, what: str = "matrix") -> np.ndarray:
    """Coerce to a finite float64 2-D array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(what, arr.shape, ("rows", "cols"))
    return ensure_finite(arr, what)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return ensure_finite(a @ b, "matmul")


def apply_activation(g: Activation, z: np.ndarray) -> np.ndarray:
    z = ensure_finite(np.asarray(z, dtype=np.float64), f"{g} input")
    return g(z)


def _seed_sequence(seed: int, stream: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed) % (1 << 64), spawn_key=(zlib.crc32(stream.encode("utf-8")),))


def derive_seed(seed: int, stream: str) -> int:
    ss = _seed_sequence(seed, stream)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, stream)))


def box_muller(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Standard normal draws built from rng.random() pairs (cos and sin branches)."""
    n = int(np.prod(shape))
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(theta), radius * np.sin(theta)])
    return z[:n].reshape(shape)


def glorot_init(rows: int, cols: int, seed: int, gain: float = 1.0, stream: str = "glorot") -> np.ndarray:
    """Uniform Glorot draw in [-gain*sqrt(6/(rows+cols)), +gain*sqrt(6/(rows+cols))].

    Each weight matrix passes its own stream name so equal shapes under one seed differ.
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"glorot_init needs rows, cols >= 1, got ({rows}, {cols})")
    if not (gain > 0 and math.isfinite(gain)):
        raise ConfigError(f"glorot_init gain must be > 0, got {gain}")
    bound = gain * math.sqrt(6.0 / (rows + cols))
    rng = make_rng(seed, stream)
    return rng.uniform(-bound, bound, size=(rows, cols))


def finite_diff_grad(f: Callable[[np.ndarray], float], theta, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a parameter vector."""
    if not eps > 0:
        raise ConfigError(f"finite_diff_grad eps must be > 0, got {eps}")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64)).ravel()
    grad = np.empty_like(theta)
    for i in range(theta.size):
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += eps
        minus[i] -= eps
        fp = float(f(plus))
        fm = float(f(minus))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalError(f"finite_diff_grad: non-finite evaluation at coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad
