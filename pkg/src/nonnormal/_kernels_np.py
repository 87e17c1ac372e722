"""Pure-numpy kernels for the RNN forward pass and backprop through time.

Fallback twin of the numba-compiled kernels in ``_kernels_nb``; both expose
the same signatures and the same arithmetic, so results agree to rounding.
The sequential recurrence costs one small gemm per time step; everything
batchable (input projection, readout, gradient accumulation) is hoisted into
single large gemms.

All kernels expect C-contiguous float64 arrays.  Matrices suffixed ``_t``
are pre-transposed by the caller.  A returned ``bad_t >= 0`` marks the first
time step whose activations went non-finite.
"""

from __future__ import annotations

import numpy as np

ACT_LINEAR, ACT_RELU, ACT_TANH, ACT_ELU = 0, 1, 2, 3


def _activate(act, pre):
    if act == ACT_LINEAR:
        return pre
    if act == ACT_RELU:
        return np.maximum(pre, 0.0)
    if act == ACT_TANH:
        return np.tanh(pre)
    return np.where(pre > 0.0, pre, np.expm1(pre))


def _deriv_from_h(act, h):
    # For every supported nonlinearity the derivative is recoverable from the
    # activation value itself, so the pre-activations are never stored.
    if act == ACT_LINEAR:
        return np.ones_like(h)
    if act == ACT_RELU:
        return (h > 0.0).astype(np.float64)
    if act == ACT_TANH:
        return 1.0 - h * h
    return np.where(h > 0.0, 1.0, h + 1.0)


def forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act):
    """Hidden states (T,B,N) and readouts (T,B,c) for the whole sequence."""
    t_len, batch, d = x.shape
    n = w_t.shape[0]
    h = np.zeros((t_len, batch, n))
    xv = x.reshape(t_len * batch, d) @ v_t
    xv += b
    xv = xv.reshape(t_len, batch, n)
    hprev = h0
    bad_t = -1
    for t in range(t_len):
        ht = _activate(act, hprev @ w_t + xv[t])
        h[t] = ht
        if not np.isfinite(np.sum(ht)):
            bad_t = t
            break
        hprev = ht
    out = h.reshape(t_len * batch, n) @ w_out_t + b_out
    return h, out.reshape(t_len, batch, -1), bad_t


def _backward(w, w_out, x, h0, h, act, d_out):
    t_len, batch, n = h.shape
    d = x.shape[2]
    c = w_out.shape[0]
    dh_proj = (d_out.reshape(t_len * batch, c) @ w_out).reshape(t_len, batch, n)
    d_pre = np.empty((t_len, batch, n))
    carry = np.zeros((batch, n))
    for t in range(t_len - 1, -1, -1):
        d_pre[t] = (dh_proj[t] + carry) * _deriv_from_h(act, h[t])
        carry = d_pre[t] @ w
    h_prev = np.concatenate([h0[None, :, :], h[:-1]], axis=0)
    dp = d_pre.reshape(t_len * batch, n)
    do = d_out.reshape(t_len * batch, c)
    dw = dp.T @ h_prev.reshape(t_len * batch, n)
    dv = dp.T @ x.reshape(t_len * batch, d)
    db = dp.sum(axis=0)
    dw_out = do.T @ h.reshape(t_len * batch, n)
    db_out = do.sum(axis=0)
    return dw, dv, db, dw_out, db_out


def _zero_grads(n, d, c):
    return (np.zeros((n, n)), np.zeros((n, d)), np.zeros(n),
            np.zeros((c, n)), np.zeros(c))


def bptt_seq_ce(w, w_t, v_t, b, w_out, w_out_t, b_out, x, h0, act,
                targets, mask):
    """Masked mean cross-entropy over the batch, and its exact gradient.

    `targets` holds integer class ids, shape (T, B); only steps with a true
    mask entry contribute.
    """
    t_len, batch, d = x.shape
    n = w.shape[0]
    c = w_out.shape[0]
    h, out, bad_t = forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act)
    if bad_t >= 0:
        return (np.nan, *_zero_grads(n, d, c), bad_t)
    n_masked = int(np.sum(mask))
    denom = float(batch * max(n_masked, 1))
    d_out = np.zeros((t_len, batch, c))
    loss = 0.0
    rows = np.arange(batch)
    for t in np.nonzero(mask)[0]:
        logits = out[t]
        m = logits.max(axis=1, keepdims=True)
        ex = np.exp(logits - m)
        z = ex.sum(axis=1, keepdims=True)
        y = targets[t]
        loss += float(np.sum(np.log(z)) + np.sum(m) - logits[rows, y].sum())
        p = ex / z
        p[rows, y] -= 1.0
        d_out[t] = p
    loss /= denom
    d_out /= denom
    grads = _backward(w, w_out, x, h0, h, act, d_out)
    return (loss, *grads, -1)


def bptt_seq_mse(w, w_t, v_t, b, w_out, w_out_t, b_out, x, h0, act,
                 targets, mask):
    """Masked mean squared error (summed over output dims) and its gradient.

    `targets` is real-valued with shape (T, B, c).
    """
    t_len, batch, d = x.shape
    n = w.shape[0]
    c = w_out.shape[0]
    h, out, bad_t = forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act)
    if bad_t >= 0:
        return (np.nan, *_zero_grads(n, d, c), bad_t)
    n_masked = int(np.sum(mask))
    denom = float(batch * max(n_masked, 1))
    d_out = np.zeros((t_len, batch, c))
    loss = 0.0
    for t in np.nonzero(mask)[0]:
        diff = out[t] - targets[t]
        loss += float(np.sum(diff * diff))
        d_out[t] = 2.0 * diff
    loss /= denom
    d_out /= denom
    grads = _backward(w, w_out, x, h0, h, act, d_out)
    return (loss, *grads, -1)
