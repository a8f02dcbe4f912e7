"""Loss, metric and optimizer: MSE with gradient, round-equal accuracy,
RMSprop update, global-norm gradient clipping.

Accuracy is defined for this regression model as the fraction of entries
whose prediction and target land on the same integer after undoing the
(0, 1) scaling: pitch and velocity on their 0-127 grid, the time column on
the dt_max tick grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteGradient, ShapeMismatch
from .model import ModelParams, ParamGrads, named_tensors
from .note_matrix import ScalingParams
from .numerics import Tensor, zeros


@dataclass
class LossValue:
    mse: float
    grad: Tensor  # same shape as predictions


@dataclass
class RmspropState:
    lr: float = 1e-4
    rho: float = 0.9
    epsilon: float = 1e-8
    v: dict[str, Tensor] | None = None  # running avg of squared gradients

    @classmethod
    def for_params(cls, params: ModelParams, lr: float = 1e-4,
                   rho: float = 0.9, epsilon: float = 1e-8) -> "RmspropState":
        v = {name: zeros(t.shape) for name, t in named_tensors(params)}
        return cls(lr=lr, rho=rho, epsilon=epsilon, v=v)


def mse(predictions: Tensor, targets: Tensor) -> LossValue:
    """Mean squared error over all N entries, with its gradient (2/N)(p - y)."""
    if predictions.shape != targets.shape:
        raise ShapeMismatch(
            f"predictions {predictions.shape} vs targets {targets.shape}")
    n = predictions.size
    diff = predictions - targets
    return LossValue(mse=float((diff * diff).sum() / n), grad=(2.0 / n) * diff)


def _quantize(values: Tensor, scaling: ScalingParams) -> np.ndarray:
    grid = np.array([scaling.pitch_divisor, scaling.velocity_divisor,
                     scaling.dt_max_ticks], dtype=np.float64)
    return np.rint(np.clip(values, 0.0, 1.0) * grid).astype(np.int64)


def accuracy(predictions: Tensor, targets: Tensor,
             scaling: ScalingParams) -> float:
    """Fraction of entries that round to the same integer after unscaling."""
    if predictions.shape != targets.shape:
        raise ShapeMismatch(
            f"predictions {predictions.shape} vs targets {targets.shape}")
    equal = _quantize(predictions, scaling) == _quantize(targets, scaling)
    return float(equal.mean())


def clip_gradients(grads: ParamGrads, max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    tensors = [t for _, t in named_tensors(grads)]
    for t in tensors:
        total += float((t * t).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for t in tensors:
            t *= factor
    return norm


def rmsprop_step(params: ModelParams, grads: ParamGrads,
                 state: RmspropState) -> None:
    """One RMSprop update, in place on params and state.

    Per entry: v <- rho*v + (1-rho)*g^2, then p <- p - lr*g/(sqrt(v) + eps).
    Refuses the whole step if any gradient entry is NaN or infinite.
    """
    param_tensors = dict(named_tensors(params))
    grad_tensors = dict(named_tensors(grads))
    for name, g in grad_tensors.items():
        if g.shape != param_tensors[name].shape:
            raise ShapeMismatch(
                f"{name}: grad {g.shape} vs param {param_tensors[name].shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    for name, g in grad_tensors.items():
        v = state.v[name]
        v *= state.rho
        v += (1.0 - state.rho) * g * g
        param_tensors[name] -= state.lr * g / (np.sqrt(v) + state.epsilon)
