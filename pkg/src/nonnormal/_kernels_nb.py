"""Numba-compiled kernels for the RNN forward pass and backprop through time.

Same signatures and arithmetic as the pure-numpy twin in ``_kernels_np``.
The win over numpy comes from fusing the per-step elementwise work (bias add,
nonlinearity, finite check, derivative) into single passes while keeping the
matrix products on BLAS via np.dot.  fastmath stays off so results are
reproducible and match the fallback to rounding.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

ACT_LINEAR, ACT_RELU, ACT_TANH, ACT_ELU = 0, 1, 2, 3


@njit(cache=True)
def _forward_into(w_t, v_t, b, x, h0, act, h):
    """Fill h (T,B,N) in place; returns the first non-finite step or -1."""
    t_len, batch, d = x.shape
    n = w_t.shape[0]
    xv = np.dot(x.reshape(t_len * batch, d), v_t).reshape(t_len, batch, n)
    hprev = h0.copy()
    for t in range(t_len):
        pre = np.dot(hprev, w_t)
        total = 0.0
        for i in range(batch):
            for j in range(n):
                z = pre[i, j] + xv[t, i, j] + b[j]
                if act == ACT_LINEAR:
                    a = z
                elif act == ACT_RELU:
                    a = z if z > 0.0 else 0.0
                elif act == ACT_TANH:
                    a = math.tanh(z)
                else:
                    a = z if z > 0.0 else math.expm1(z)
                h[t, i, j] = a
                total += a
        if not np.isfinite(total):
            return t
        hprev = h[t]
    return -1


@njit(cache=True)
def forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act):
    """Hidden states (T,B,N) and readouts (T,B,c) for the whole sequence."""
    t_len, batch, _ = x.shape
    n = w_t.shape[0]
    c = w_out_t.shape[1]
    h = np.zeros((t_len, batch, n))
    bad_t = _forward_into(w_t, v_t, b, x, h0, act, h)
    out = np.dot(h.reshape(t_len * batch, n), w_out_t)
    for r in range(t_len * batch):
        for k in range(c):
            out[r, k] += b_out[k]
    return h, out.reshape(t_len, batch, c), bad_t


@njit(cache=True)
def _backward(w, w_out, x, h0, h, act, d_out):
    t_len, batch, n = h.shape
    d = x.shape[2]
    c = w_out.shape[0]
    dh_proj = np.dot(d_out.reshape(t_len * batch, c), w_out).reshape(
        t_len, batch, n)
    d_pre = np.empty((t_len, batch, n))
    carry = np.zeros((batch, n))
    for t in range(t_len - 1, -1, -1):
        for i in range(batch):
            for j in range(n):
                hv = h[t, i, j]
                if act == ACT_LINEAR:
                    g = 1.0
                elif act == ACT_RELU:
                    g = 1.0 if hv > 0.0 else 0.0
                elif act == ACT_TANH:
                    g = 1.0 - hv * hv
                else:
                    g = 1.0 if hv > 0.0 else hv + 1.0
                d_pre[t, i, j] = (dh_proj[t, i, j] + carry[i, j]) * g
        carry = np.dot(d_pre[t], w)
    h_prev = np.empty((t_len, batch, n))
    h_prev[0] = h0
    h_prev[1:] = h[:t_len - 1]
    dp = d_pre.reshape(t_len * batch, n)
    dp_t = dp.T.copy()
    do = d_out.reshape(t_len * batch, c)
    dw = np.dot(dp_t, h_prev.reshape(t_len * batch, n))
    dv = np.dot(dp_t, x.reshape(t_len * batch, d))
    dw_out = np.dot(do.T.copy(), h.reshape(t_len * batch, n))
    db = np.zeros(n)
    db_out = np.zeros(c)
    for r in range(t_len * batch):
        for j in range(n):
            db[j] += dp[r, j]
        for k in range(c):
            db_out[k] += do[r, k]
    return dw, dv, db, dw_out, db_out


@njit(cache=True)
def bptt_seq_ce(w, w_t, v_t, b, w_out, w_out_t, b_out, x, h0, act,
                targets, mask):
    """Masked mean cross-entropy over the batch, and its exact gradient."""
    t_len, batch, d = x.shape
    n = w.shape[0]
    c = w_out.shape[0]
    h, out, bad_t = forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act)
    if bad_t >= 0:
        return (np.nan, np.zeros((n, n)), np.zeros((n, d)), np.zeros(n),
                np.zeros((c, n)), np.zeros(c), bad_t)
    n_masked = 0
    for t in range(t_len):
        if mask[t]:
            n_masked += 1
    denom = float(batch * (n_masked if n_masked > 0 else 1))
    d_out = np.zeros((t_len, batch, c))
    loss = 0.0
    for t in range(t_len):
        if not mask[t]:
            continue
        for i in range(batch):
            mx = out[t, i, 0]
            for k in range(1, c):
                if out[t, i, k] > mx:
                    mx = out[t, i, k]
            z = 0.0
            for k in range(c):
                z += math.exp(out[t, i, k] - mx)
            y = targets[t, i]
            loss += math.log(z) + mx - out[t, i, y]
            inv = 1.0 / z
            for k in range(c):
                p = math.exp(out[t, i, k] - mx) * inv
                if k == y:
                    p -= 1.0
                d_out[t, i, k] = p / denom
    loss /= denom
    dw, dv, db, dw_out, db_out = _backward(w, w_out, x, h0, h, act, d_out)
    return loss, dw, dv, db, dw_out, db_out, -1


@njit(cache=True)
def bptt_seq_mse(w, w_t, v_t, b, w_out, w_out_t, b_out, x, h0, act,
                 targets, mask):
    """Masked mean squared error (summed over output dims) and its gradient."""
    t_len, batch, d = x.shape
    n = w.shape[0]
    c = w_out.shape[0]
    h, out, bad_t = forward_seq(w_t, v_t, b, w_out_t, b_out, x, h0, act)
    if bad_t >= 0:
        return (np.nan, np.zeros((n, n)), np.zeros((n, d)), np.zeros(n),
                np.zeros((c, n)), np.zeros(c), bad_t)
    n_masked = 0
    for t in range(t_len):
        if mask[t]:
            n_masked += 1
    denom = float(batch * (n_masked if n_masked > 0 else 1))
    d_out = np.zeros((t_len, batch, c))
    loss = 0.0
    for t in range(t_len):
        if not mask[t]:
            continue
        for i in range(batch):
            for k in range(c):
                diff = out[t, i, k] - targets[t, i, k]
                loss += diff * diff
                d_out[t, i, k] = 2.0 * diff / denom
    loss /= denom
    dw, dv, db, dw_out, db_out = _backward(w, w_out, x, h0, h, act, d_out)
    return loss, dw, dv, db, dw_out, db_out, -1
