"""Single-layer LSTM network with a dropout + dense head, forward and exact
backward passes.

The network is many-to-one: the window of note rows runs through the LSTM,
the final hidden state is dropped out (inverted dropout, so inference is the
identity) and a linear dense layer maps it to the next note row. Gradients
are hand-derived; the gate column order inside every 4H-wide tensor is fixed
as (input, forget, cell-candidate, output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRate, CacheMismatch, ShapeMismatch
from .numerics import Rng, Tensor, bernoulli_mask, glorot_uniform, sigmoid, tanh, zeros

INPUT_DIM = 3
OUTPUT_DIM = 3


@dataclass
class LstmParams:
    kernel: Tensor            # [input_dim, 4*hidden]
    recurrent_kernel: Tensor  # [hidden, 4*hidden]
    bias: Tensor              # [4*hidden]


@dataclass
class DenseParams:
    weights: Tensor  # [hidden, output_dim]
    bias: Tensor     # [output_dim]


@dataclass
class ModelParams:
    lstm: LstmParams
    dense: DenseParams
    hidden: int
    dropout_rate: float = 0.75
    window: int = 50


@dataclass
class ParamGrads:
    lstm: LstmParams
    dense: DenseParams


PARAM_NAMES = (
    "lstm.kernel",
    "lstm.recurrent_kernel",
    "lstm.bias",
    "dense.weights",
    "dense.bias",
)


def named_tensors(params: ModelParams | ParamGrads) -> list[tuple[str, Tensor]]:
    """The five trainable tensors in their fixed serialization order."""
    return [
        ("lstm.kernel", params.lstm.kernel),
        ("lstm.recurrent_kernel", params.lstm.recurrent_kernel),
        ("lstm.bias", params.lstm.bias),
        ("dense.weights", params.dense.weights),
        ("dense.bias", params.dense.bias),
    ]


def init_params(rng: Rng, hidden: int, input_dim: int = INPUT_DIM,
                output_dim: int = OUTPUT_DIM, dropout_rate: float = 0.75,
                window: int = 50) -> ModelParams:
    """Glorot-uniform weights, zero biases except the forget gate at 1.0."""
    kernel = glorot_uniform(rng, input_dim, 4 * hidden, (input_dim, 4 * hidden))
    recurrent = glorot_uniform(rng, hidden, 4 * hidden, (hidden, 4 * hidden))
    bias = zeros(4 * hidden)
    bias[hidden : 2 * hidden] = 1.0
    weights = glorot_uniform(rng, hidden, output_dim, (hidden, output_dim))
    return ModelParams(
        lstm=LstmParams(kernel=kernel, recurrent_kernel=recurrent, bias=bias),
        dense=DenseParams(weights=weights, bias=zeros(output_dim)),
        hidden=hidden,
        dropout_rate=dropout_rate,
        window=window,
    )


@dataclass
class LstmCache:
    xs: Tensor       # [T, B, input_dim]
    gates: Tensor    # [T, B, 4*hidden], activated (i, f, g, o)
    cells: Tensor    # [T, B, hidden]
    tanh_cells: Tensor
    hiddens: Tensor  # [T, B, hidden]
    h0: Tensor
    c0: Tensor


@dataclass
class ForwardCache:
    lstm: LstmCache
    h_last: Tensor    # [B, hidden], pre-dropout
    mask: Tensor      # [B, hidden]
    keep_prob: float
    dense_in: Tensor  # [B, hidden], post-dropout input to the dense layer
    mode: str


def lstm_forward(params: LstmParams, inputs: Tensor,
                 h0: Tensor | None = None,
                 c0: Tensor | None = None) -> tuple[Tensor, LstmCache]:
    """Run the LSTM over [B, T, input_dim]; returns the final hidden state.

    Per step: z = x_t K + h_{t-1} R + b, split into (i, f, g, o) with
    sigmoid on i/f/o and tanh on g; c_t = f*c_{t-1} + i*g; h_t = o*tanh(c_t).
    """
    if inputs.ndim != 3:
        raise ShapeMismatch(f"inputs must be [B, T, D], got {inputs.shape}")
    batch, steps, input_dim = inputs.shape
    if steps < 1:
        raise ShapeMismatch("need at least one timestep")
    if params.kernel.shape[0] != input_dim:
        raise ShapeMismatch(
            f"input dim {input_dim} vs kernel {params.kernel.shape}")
    hidden = params.recurrent_kernel.shape[0]
    if params.kernel.shape[1] != 4 * hidden or params.bias.shape != (4 * hidden,):
        raise ShapeMismatch("kernel/recurrent_kernel/bias extents disagree")
    h = zeros((batch, hidden)) if h0 is None else h0
    c = zeros((batch, hidden)) if c0 is None else c0
    if h.shape != (batch, hidden) or c.shape != (batch, hidden):
        raise ShapeMismatch("h0/c0 shape does not match batch and hidden size")

    xs = np.ascontiguousarray(inputs.transpose(1, 0, 2))
    # input contribution for every step in one product
    zx = (xs.reshape(steps * batch, input_dim) @ params.kernel).reshape(
        steps, batch, 4 * hidden)

    gates = np.empty((steps, batch, 4 * hidden))
    cells = np.empty((steps, batch, hidden))
    tanh_cells = np.empty((steps, batch, hidden))
    hiddens = np.empty((steps, batch, hidden))
    h0_saved, c0_saved = h, c
    for t in range(steps):
        z = zx[t] + h @ params.recurrent_kernel + params.bias
        i = sigmoid(z[:, :hidden])
        f = sigmoid(z[:, hidden : 2 * hidden])
        g = tanh(z[:, 2 * hidden : 3 * hidden])
        o = sigmoid(z[:, 3 * hidden :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gates[t, :, :hidden] = i
        gates[t, :, hidden : 2 * hidden] = f
        gates[t, :, 2 * hidden : 3 * hidden] = g
        gates[t, :, 3 * hidden :] = o
        cells[t] = c
        tanh_cells[t] = tc
        hiddens[t] = h
    cache = LstmCache(xs=xs, gates=gates, cells=cells, tanh_cells=tanh_cells,
                      hiddens=hiddens, h0=h0_saved, c0=c0_saved)
    return h, cache


def lstm_backward(params: LstmParams, cache: LstmCache,
                  grad_h_last: Tensor) -> tuple[LstmParams, Tensor]:
    """Backpropagate through time from the final hidden state.

    Returns gradients packed as an LstmParams plus the gradient with respect
    to the inputs, shaped [B, T, input_dim].
    """
    steps, batch, hidden = cache.hiddens.shape
    input_dim = cache.xs.shape[2]
    if grad_h_last.shape != (batch, hidden):
        raise CacheMismatch(
            f"grad shape {grad_h_last.shape} vs cached ({batch}, {hidden})")
    if params.recurrent_kernel.shape != (hidden, 4 * hidden) \
            or params.kernel.shape != (input_dim, 4 * hidden):
        raise CacheMismatch("params do not match the cached forward shapes")

    dz = np.empty((steps, batch, 4 * hidden))
    dh = grad_h_last
    dc = zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        i = cache.gates[t, :, :hidden]
        f = cache.gates[t, :, hidden : 2 * hidden]
        g = cache.gates[t, :, 2 * hidden : 3 * hidden]
        o = cache.gates[t, :, 3 * hidden :]
        tc = cache.tanh_cells[t]
        c_prev = cache.cells[t - 1] if t > 0 else cache.c0

        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[t, :, :hidden] = dc * g * i * (1.0 - i)
        dz[t, :, hidden : 2 * hidden] = dc * c_prev * f * (1.0 - f)
        dz[t, :, 2 * hidden : 3 * hidden] = dc * i * (1.0 - g * g)
        dz[t, :, 3 * hidden :] = do * o * (1.0 - o)

        dh = dz[t] @ params.recurrent_kernel.T
        dc = dc * f

    h_prev = np.empty((steps, batch, hidden))
    h_prev[0] = cache.h0
    h_prev[1:] = cache.hiddens[:-1]

    flat_dz = dz.reshape(steps * batch, 4 * hidden)
    d_kernel = cache.xs.reshape(steps * batch, input_dim).T @ flat_dz
    d_recurrent = h_prev.reshape(steps * batch, hidden).T @ flat_dz
    d_bias = flat_dz.sum(axis=0)
    d_inputs = (flat_dz @ params.kernel.T).reshape(
        steps, batch, input_dim).transpose(1, 0, 2)
    grads = LstmParams(kernel=d_kernel, recurrent_kernel=d_recurrent,
                       bias=d_bias)
    return grads, np.ascontiguousarray(d_inputs)


def dropout_forward(x: Tensor, rate: float, mode: str,
                    rng: Rng | None = None) -> tuple[Tensor, Tensor]:
    """Inverted dropout: train scales kept units by 1/keep, infer is identity."""
    if not 0.0 <= rate < 1.0:
        raise BadRate(f"dropout rate must be in [0, 1), got {rate}")
    if mode == "infer":
        return x, np.ones_like(x)
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an Rng")
    keep = 1.0 - rate
    mask = bernoulli_mask(rng, x.shape, keep)
    return x * mask / keep, mask


def dense_forward(params: DenseParams, h: Tensor) -> Tensor:
    if h.ndim != 2 or h.shape[1] != params.weights.shape[0]:
        raise ShapeMismatch(f"dense input {h.shape} vs weights {params.weights.shape}")
    return h @ params.weights + params.bias


def dense_backward(params: DenseParams, h: Tensor,
                   grad_y: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    if grad_y.shape != (h.shape[0], params.weights.shape[1]):
        raise ShapeMismatch(f"grad {grad_y.shape} vs output "
                            f"({h.shape[0]}, {params.weights.shape[1]})")
    grad_w = h.T @ grad_y
    grad_b = grad_y.sum(axis=0)
    grad_h = grad_y @ params.weights.T
    return grad_w, grad_b, grad_h


def model_forward(params: ModelParams, inputs: Tensor, mode: str,
                  rng: Rng | None = None) -> tuple[Tensor, ForwardCache]:
    """LSTM -> dropout -> dense -> identity activation over a batch window."""
    if inputs.ndim != 3 or inputs.shape[1] != params.window:
        raise ShapeMismatch(
            f"inputs must be [B, {params.window}, D], got {inputs.shape}")
    h_last, lstm_cache = lstm_forward(params.lstm, inputs)
    dropped, mask = dropout_forward(h_last, params.dropout_rate, mode, rng)
    predictions = dense_forward(params.dense, dropped)
    keep = 1.0 if mode == "infer" else 1.0 - params.dropout_rate
    cache = ForwardCache(lstm=lstm_cache, h_last=h_last, mask=mask,
                         keep_prob=keep, dense_in=dropped, mode=mode)
    return predictions, cache


def model_backward(params: ModelParams, cache: ForwardCache,
                   grad_predictions: Tensor) -> ParamGrads:
    """Gradients of a scalar loss with respect to every model tensor."""
    if cache.h_last.shape != (grad_predictions.shape[0], params.hidden):
        raise CacheMismatch("cache batch/hidden extents do not match params")
    grad_w, grad_b, grad_dropped = dense_backward(
        params.dense, cache.dense_in, grad_predictions)
    grad_h_last = grad_dropped * cache.mask / cache.keep_prob
    lstm_grads, _ = lstm_backward(params.lstm, cache.lstm, grad_h_last)
    return ParamGrads(lstm=lstm_grads,
                      dense=DenseParams(weights=grad_w, bias=grad_b))
