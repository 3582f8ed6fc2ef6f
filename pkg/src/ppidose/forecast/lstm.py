"""Single-layer LSTM cell with full-sequence forward and backward passes.

Gate layout in the fused weight matrices is (input, forget, candidate,
output).  All math is batched numpy in float64; the backward pass is
standard backprop-through-time over cached activations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LstmParams:
    wx: np.ndarray  # [input_size, 4*hidden]
    wh: np.ndarray  # [hidden, 4*hidden]
    b: np.ndarray   # [4*hidden]

    @property
    def hidden_size(self) -> int:
        return self.wh.shape[0]

    @property
    def input_size(self) -> int:
        return self.wx.shape[0]

    def copy(self) -> "LstmParams":
        return LstmParams(self.wx.copy(), self.wh.copy(), self.b.copy())


def init_lstm(rng: np.random.Generator, input_size: int, hidden_size: int) -> LstmParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per tensor."""
    bx = 1.0 / np.sqrt(input_size)
    bh = 1.0 / np.sqrt(hidden_size)
    return LstmParams(
        wx=rng.uniform(-bx, bx, (input_size, 4 * hidden_size)),
        wh=rng.uniform(-bh, bh, (hidden_size, 4 * hidden_size)),
        b=rng.uniform(-bh, bh, 4 * hidden_size),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(params: LstmParams, x: np.ndarray, h0: np.ndarray, c0: np.ndarray,
                 want_cache: bool = True):
    """Run the cell over ``x`` of shape [B, T, D].

    Returns (h_seq [B,T,H], (h_T, c_T), cache).  ``cache`` is None when
    ``want_cache`` is false (inference).
    """
    batch, steps, _ = x.shape
    hidden = params.hidden_size
    h, c = h0, c0
    h_seq = np.empty((batch, steps, hidden))
    if want_cache:
        gates = np.empty((batch, steps, 4 * hidden))   # activated i,f,g,o
        c_prev = np.empty((batch, steps, hidden))
        h_prev = np.empty((batch, steps, hidden))
        tanh_c = np.empty((batch, steps, hidden))
    for t in range(steps):
        z = x[:, t] @ params.wx + h @ params.wh + params.b
        zi = _sigmoid(z[:, :hidden])
        zf = _sigmoid(z[:, hidden:2 * hidden])
        zg = np.tanh(z[:, 2 * hidden:3 * hidden])
        zo = _sigmoid(z[:, 3 * hidden:])
        c_new = zf * c + zi * zg
        tc = np.tanh(c_new)
        h_new = zo * tc
        if want_cache:
            gates[:, t, :hidden] = zi
            gates[:, t, hidden:2 * hidden] = zf
            gates[:, t, 2 * hidden:3 * hidden] = zg
            gates[:, t, 3 * hidden:] = zo
            c_prev[:, t] = c
            h_prev[:, t] = h
            tanh_c[:, t] = tc
        h_seq[:, t] = h_new
        h, c = h_new, c_new
    cache = (x, gates, c_prev, h_prev, tanh_c) if want_cache else None
    return h_seq, (h, c), cache


def lstm_backward(params: LstmParams, cache, dh_seq: np.ndarray,
                  dh_final: np.ndarray, dc_final: np.ndarray):
    """BPTT through a cached forward pass.

    ``dh_seq`` [B,T,H] is the gradient injected at every step's hidden
    output (zeros where unused); ``dh_final``/``dc_final`` flow into the
    last hidden/cell state from downstream consumers.

    Returns ((dwx, dwh, db), dx, dh0, dc0).
    """
    x, gates, c_prev, h_prev, tanh_c = cache
    batch, steps, _ = x.shape
    hidden = params.hidden_size
    dwx = np.zeros_like(params.wx)
    dwh = np.zeros_like(params.wh)
    db = np.zeros_like(params.b)
    dx = np.empty_like(x)
    dh_next = dh_final.copy()
    dc_next = dc_final.copy()
    dz = np.empty((batch, 4 * hidden))
    for t in range(steps - 1, -1, -1):
        gi = gates[:, t, :hidden]
        gf = gates[:, t, hidden:2 * hidden]
        gg = gates[:, t, 2 * hidden:3 * hidden]
        go = gates[:, t, 3 * hidden:]
        tc = tanh_c[:, t]

        dh = dh_seq[:, t] + dh_next
        do = dh * tc
        dc = dc_next + dh * go * (1.0 - tc * tc)
        di = dc * gg
        df = dc * c_prev[:, t]
        dg = dc * gi
        dc_next = dc * gf

        dz[:, :hidden] = di * gi * (1.0 - gi)
        dz[:, hidden:2 * hidden] = df * gf * (1.0 - gf)
        dz[:, 2 * hidden:3 * hidden] = dg * (1.0 - gg * gg)
        dz[:, 3 * hidden:] = do * go * (1.0 - go)

        dwx += x[:, t].T @ dz
        dwh += h_prev[:, t].T @ dz
        db += dz.sum(axis=0)
        dx[:, t] = dz @ params.wx.T
        dh_next = dz @ params.wh.T
    return (dwx, dwh, db), dx, dh_next, dc_next
