"""Numeric substrate: float64 tensors, kernels, and a deterministic RNG.

Tensors are plain C-contiguous ``numpy.ndarray`` values with dtype float64;
``as_tensor`` is the single entry point that enforces this. All model math in
the package goes through the handful of kernels defined here.

Randomness comes from :class:`Rng`, a SplitMix64 generator (Steele, Lea &
Vigna's 64-bit shift/multiply mixer over a Weyl sequence). The algorithm is
frozen: the same seed produces the same stream on every platform, and the
whole generator state is one 64-bit integer, which makes checkpointing exact.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BadProbability, ShapeMismatch

Tensor = np.ndarray

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def as_tensor(data) -> Tensor:
    """Coerce to a C-contiguous float64 array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def zeros(shape) -> Tensor:
    return np.zeros(shape, dtype=np.float64)


class Rng:
    """SplitMix64 stream of uniform doubles.

    Each draw advances a Weyl counter by the golden-ratio increment and
    applies the SplitMix64 finalizer. Because the mixer is a pure function of
    the counter, a block of n draws is computed vectorized and is bit-equal
    to n sequential draws.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    @property
    def state(self) -> int:
        return self._state

    def set_state(self, state: int) -> None:
        self._state = state & _MASK64

    def _next_block(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(self._state) + np.uint64(_GOLDEN) * steps
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + _GOLDEN * count) & _MASK64
        return z

    def uniform(self, shape) -> Tensor:
        """Uniform draws in [0, 1) with 53-bit resolution."""
        if isinstance(shape, int):
            shape = (shape,)
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        bits = self._next_block(count)
        out = (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return out.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic random permutation of range(n)."""
        keys = self.uniform((n,))
        return np.argsort(keys, kind="stable")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with explicit shape validation."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatch(f"matmul needs rank-2 operands, got {a.shape} x {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")
    return a + b


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")
    return a - b


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")
    return a * b


def scale(a: Tensor, c: float) -> Tensor:
    return a * float(c)


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, computed in the numerically stable branch."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x: Tensor) -> Tensor:
    return np.tanh(np.asarray(x, dtype=np.float64))


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int, shape) -> Tensor:
    """Uniform init on [-L, L] with L = sqrt(6 / (fan_in + fan_out))."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got {fan_in}, {fan_out}")
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


def bernoulli_mask(rng: Rng, shape, keep_prob: float) -> Tensor:
    """0/1 tensor, each entry 1 with probability keep_prob."""
    if not 0.0 < keep_prob <= 1.0:
        raise BadProbability(f"keep_prob must be in (0, 1], got {keep_prob}")
    return (rng.uniform(shape) < keep_prob).astype(np.float64)
