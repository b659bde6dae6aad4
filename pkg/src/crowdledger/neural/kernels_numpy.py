"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled module; the backend selector picks one
of the two at import time.  Shapes (batch B, time T, channels C):

* conv1d: x (B, T, Cin), w (Cout, K, Cin), b (Cout,) -> y (B, T-K+1, Cout)
* lstm:   x (B, T, D), wx (D, 4H), wh (H, 4H), b (4H,), gate order i|f|g|o,
          zero initial state -> h (B, T, H) plus caches for backward
"""

from __future__ import annotations

import numpy as np


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    kernel = w.shape[1]
    t_out = x.shape[1] - kernel + 1
    y = np.broadcast_to(b, (x.shape[0], t_out, w.shape[0])).copy()
    for k in range(kernel):
        y += x[:, k : k + t_out, :] @ w[:, k, :].T
    return y


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kernel = w.shape[1]
    t_out = dy.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for k in range(kernel):
        dx[:, k : k + t_out, :] += dy @ w[:, k, :]
        dw[:, k, :] = np.tensordot(dy, x[:, k : k + t_out, :], axes=([0, 1], [0, 1]))
    db = dy.sum(axis=(0, 1))
    return dx, dw, db


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(
    x: np.ndarray, wx: np.ndarray, wh: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch, steps, _ = x.shape
    hidden = wh.shape[0]
    h = np.zeros((batch, steps, hidden))
    c = np.zeros((batch, steps, hidden))
    gates = np.zeros((batch, steps, 4 * hidden))
    h_prev = np.zeros((batch, hidden))
    c_prev = np.zeros((batch, hidden))
    for t in range(steps):
        z = x[:, t, :] @ wx + h_prev @ wh + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c_t = f * c_prev + i * g
        h_t = o * np.tanh(c_t)
        gates[:, t, :hidden] = i
        gates[:, t, hidden : 2 * hidden] = f
        gates[:, t, 2 * hidden : 3 * hidden] = g
        gates[:, t, 3 * hidden :] = o
        c[:, t, :] = c_t
        h[:, t, :] = h_t
        h_prev, c_prev = h_t, c_t
    return h, c, gates


def lstm_backward(
    x: np.ndarray,
    wx: np.ndarray,
    wh: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    gates: np.ndarray,
    dh_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    batch, steps, _ = x.shape
    hidden = wh.shape[0]
    dx = np.zeros_like(x)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * hidden)
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        i = gates[:, t, :hidden]
        f = gates[:, t, hidden : 2 * hidden]
        g = gates[:, t, 2 * hidden : 3 * hidden]
        o = gates[:, t, 3 * hidden :]
        c_t = c[:, t, :]
        c_prev = c[:, t - 1, :] if t > 0 else np.zeros((batch, hidden))
        h_prev = h[:, t - 1, :] if t > 0 else np.zeros((batch, hidden))
        tanh_c = np.tanh(c_t)
        dh = dh_out[:, t, :] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dx[:, t, :] = dz @ wx.T
        dwx += x[:, t, :].T @ dz
        dwh += h_prev.T @ dz
        db += dz.sum(axis=0)
        dh_next = dz @ wh.T
        dc_next = dc * f
    return dx, dwx, dwh, db
