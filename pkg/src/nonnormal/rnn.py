"""Vanilla RNN: forward pass, backprop through time, losses, and rmsprop.

The state update is h_t = f(W h_{t-1} + V x_t + b) with a linear readout
o_t = W_out h_t + b_out.  Losses are masked means over the batch: only time
steps with a true mask entry contribute, and the total is divided by
batch * n_masked_steps.  The heavy sequence loops live in the kernel
backends (see ``backend``); this module owns parameter containers, shape
handling, the optimizer, and checkpoint I/O.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import backend

__all__ = [
    "ACTIVATIONS",
    "LOSS_KINDS",
    "RnnParams",
    "RmspropState",
    "TrainingDivergence",
    "activation",
    "forward",
    "bptt",
    "masked_loss",
    "sequence_loss",
    "init_rmsprop",
    "rmsprop_step",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATIONS = {"linear": 0, "relu": 1, "tanh": 2, "elu": 3}
LOSS_KINDS = ("mse", "cross_entropy")

PARAM_NAMES = ("w", "v", "b", "w_out", "b_out")


class TrainingDivergence(RuntimeError):
    """Activations or parameters went non-finite; `step` is the time step."""

    def __init__(self, step: int, message: str):
        super().__init__(message)
        self.step = step


@dataclass
class RnnParams:
    """Trainable state: recurrent W (N,N), input V (N,d), recurrent bias b
    (N,), readout W_out (c,N) and readout bias b_out (c,)."""

    w: np.ndarray
    v: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name,
                    np.ascontiguousarray(getattr(self, name), dtype=np.float64))

    @property
    def n_hidden(self) -> int:
        return self.w.shape[0]

    @property
    def n_in(self) -> int:
        return self.v.shape[1]

    @property
    def n_out(self) -> int:
        return self.w_out.shape[0]

    def named_arrays(self):
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "RnnParams":
        return RnnParams(*(getattr(self, name).copy() for name in PARAM_NAMES))

    def zeros_like(self) -> "RnnParams":
        return RnnParams(*(np.zeros_like(getattr(self, name))
                           for name in PARAM_NAMES))

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for _, a in self.named_arrays())


def activation(kind: str, x):
    """Value and derivative of the named nonlinearity, elementwise."""
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown nonlinearity {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if kind == "linear":
        return x.copy(), np.ones_like(x)
    if kind == "relu":
        return np.maximum(x, 0.0), (x > 0.0).astype(np.float64)
    if kind == "tanh":
        y = np.tanh(x)
        return y, 1.0 - y * y
    y = np.where(x > 0.0, x, np.expm1(x))
    return y, np.where(x > 0.0, 1.0, np.exp(x))


def _act_code(kind: str) -> int:
    try:
        return ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {kind!r}") from None


def _prep_inputs(params: RnnParams, inputs, h0):
    x = np.ascontiguousarray(inputs, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"inputs must be (time, batch, dim), got shape {x.shape}")
    if x.shape[2] != params.n_in:
        raise ValueError(
            f"input dim {x.shape[2]} does not match V columns {params.n_in}")
    batch = x.shape[1]
    n = params.n_hidden
    if h0 is None:
        h0 = np.zeros((batch, n))
    else:
        h0 = np.asarray(h0, dtype=np.float64)
        if h0.ndim == 1:
            h0 = np.broadcast_to(h0, (batch, n))
        h0 = np.ascontiguousarray(h0)
        if h0.shape != (batch, n):
            raise ValueError(f"h0 shape {h0.shape} does not match ({batch}, {n})")
    w_t = np.ascontiguousarray(params.w.T)
    v_t = np.ascontiguousarray(params.v.T)
    w_out_t = np.ascontiguousarray(params.w_out.T)
    return x, h0, w_t, v_t, w_out_t


def forward(params: RnnParams, nonlinearity: str, inputs, h0=None):
    """Run the network over inputs (T,B,d).

    Returns (hidden (T,B,N), outputs (T,B,c)); h0 defaults to zeros.  Raises
    TrainingDivergence naming the first time step whose activations went
    non-finite.
    """
    act = _act_code(nonlinearity)
    x, h0, w_t, v_t, w_out_t = _prep_inputs(params, inputs, h0)
    kern = backend.kernels()
    h, out, bad_t = kern.forward_seq(w_t, v_t, params.b, w_out_t,
                                     params.b_out, x, h0, act)
    if bad_t >= 0:
        raise TrainingDivergence(
            bad_t, f"non-finite activations at time step {bad_t}")
    return h, out


def bptt(params: RnnParams, nonlinearity: str, inputs, targets, mask,
         loss_kind: str):
    """Masked mean loss over the batch and its exact gradient.

    mask is a (T,) boolean array selecting the loss-bearing steps.  For
    cross_entropy, targets holds class ids with shape (T,B); for mse it is
    real-valued with shape (T,B,c).  Returns (loss, grads) with grads shaped
    like the parameters.
    """
    if loss_kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    act = _act_code(nonlinearity)
    x, h0, w_t, v_t, w_out_t = _prep_inputs(params, inputs, h0=None)
    t_len, batch = x.shape[0], x.shape[1]
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if mask.shape != (t_len,):
        raise ValueError(f"mask must have shape ({t_len},), got {mask.shape}")
    kern = backend.kernels()
    if loss_kind == "cross_entropy":
        targets = np.ascontiguousarray(targets, dtype=np.int64)
        if targets.shape != (t_len, batch):
            raise ValueError(
                f"class targets must have shape ({t_len}, {batch}), "
                f"got {targets.shape}")
        res = kern.bptt_seq_ce(params.w, w_t, v_t, params.b, params.w_out,
                               w_out_t, params.b_out, x, h0, act,
                               targets, mask)
    else:
        targets = np.ascontiguousarray(targets, dtype=np.float64)
        if targets.shape != (t_len, batch, params.n_out):
            raise ValueError(
                f"mse targets must have shape ({t_len}, {batch}, "
                f"{params.n_out}), got {targets.shape}")
        res = kern.bptt_seq_mse(params.w, w_t, v_t, params.b, params.w_out,
                                w_out_t, params.b_out, x, h0, act,
                                targets, mask)
    loss, dw, dv, db, dw_out, db_out, bad_t = res
    if bad_t >= 0:
        raise TrainingDivergence(
            bad_t, f"non-finite activations at time step {bad_t}")
    return float(loss), RnnParams(w=dw, v=dv, b=db, w_out=dw_out, b_out=db_out)


def masked_loss(outputs, targets, mask, loss_kind: str) -> float:
    """Loss of precomputed outputs under the same masking convention as bptt."""
    outputs = np.asarray(outputs, dtype=np.float64)
    t_len, batch, _ = outputs.shape
    mask = np.asarray(mask, dtype=bool)
    steps = np.nonzero(mask)[0]
    denom = float(batch * max(len(steps), 1))
    if loss_kind == "cross_entropy":
        targets = np.asarray(targets, dtype=np.int64)
        rows = np.arange(batch)
        total = 0.0
        for t in steps:
            logits = outputs[t]
            m = logits.max(axis=1, keepdims=True)
            z = np.exp(logits - m).sum(axis=1)
            total += float(np.sum(np.log(z)) + np.sum(m)
                           - logits[rows, targets[t]].sum())
        return total / denom
    if loss_kind != "mse":
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    targets = np.asarray(targets, dtype=np.float64)
    diff = outputs[steps] - targets[steps]
    return float(np.sum(diff * diff)) / denom


def sequence_loss(params: RnnParams, nonlinearity: str, inputs, targets,
                  mask, loss_kind: str) -> float:
    """Forward pass plus masked loss, without gradients."""
    _, out = forward(params, nonlinearity, inputs)
    return masked_loss(out, targets, mask, loss_kind)


@dataclass
class RmspropState:
    """Elementwise mean-square accumulators plus the optimizer settings."""

    sq: RnnParams
    decay: float = 0.9
    epsilon: float = 1e-8
    learning_rate: float = 1e-3


def init_rmsprop(params: RnnParams, learning_rate: float,
                 decay: float = 0.9, epsilon: float = 1e-8) -> RmspropState:
    return RmspropState(sq=params.zeros_like(), decay=decay,
                        epsilon=epsilon, learning_rate=learning_rate)


def rmsprop_step(state: RmspropState, params: RnnParams, grads: RnnParams):
    """One rmsprop update, in place:

        acc   <- decay * acc + (1 - decay) * grad^2
        param <- param - lr * grad / (sqrt(acc) + epsilon)

    Returns the mutated (params, state).
    """
    decay = state.decay
    lr = state.learning_rate
    eps = state.epsilon
    for (_, p), (_, g), (_, s) in zip(params.named_arrays(),
                                      grads.named_arrays(),
                                      state.sq.named_arrays()):
        s *= decay
        s += (1.0 - decay) * g * g
        p -= lr * g / (np.sqrt(s) + eps)
    return params, state


def save_checkpoint(path, params: RnnParams, meta: dict | None = None):
    """Write params plus a JSON metadata blob to an .npz container.

    Layout: one float64 C-order array per parameter under its name (w, v, b,
    w_out, b_out) and the metadata as a JSON string under 'meta'.
    """
    meta_json = json.dumps(meta or {}, sort_keys=True)
    np.savez(path, meta=np.asarray(meta_json),
             **{name: arr for name, arr in params.named_arrays()})


def load_checkpoint(path):
    """Read a checkpoint written by save_checkpoint: (params, meta dict)."""
    with np.load(path, allow_pickle=False) as data:
        params = RnnParams(*(data[name] for name in PARAM_NAMES))
        meta = json.loads(str(data["meta"]))
    return params, meta
