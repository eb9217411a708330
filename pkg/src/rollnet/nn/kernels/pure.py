"""Pure numpy implementations of the gate kernels.

Reference semantics for the compiled backend in _fast.pyx; both must stay
numerically interchangeable (same formulas, same gate order i, f, o, g).
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_gates_forward(pre: np.ndarray, c: np.ndarray):
    """Activate gate preactivations and advance the cell state.

    pre: (B, 4H) preactivations laid out as [input, forget, output, candidate].
    c:   (B, H) previous cell state.
    Returns (gates, c_new, h_new) where gates holds the activated values in
    the same (B, 4H) layout.
    """
    h = c.shape[1]
    gates = np.empty_like(pre)
    gates[:, : 3 * h] = _sigmoid(pre[:, : 3 * h])
    gates[:, 3 * h :] = np.tanh(pre[:, 3 * h :])
    i = gates[:, :h]
    f = gates[:, h : 2 * h]
    o = gates[:, 2 * h : 3 * h]
    g = gates[:, 3 * h :]
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return gates, c_new, h_new


def lstm_gates_backward(
    gates: np.ndarray,
    c: np.ndarray,
    c_new: np.ndarray,
    dh: np.ndarray | None,
    dc: np.ndarray | None,
):
    """Backward pass through the gate nonlinearities and cell update.

    dh, dc are the cotangents of h_new and c_new (None means zero).
    Returns (dpre, dc_prev): gradients for the preactivations and for the
    incoming cell state.
    """
    h = c.shape[1]
    i = gates[:, :h]
    f = gates[:, h : 2 * h]
    o = gates[:, 2 * h : 3 * h]
    g = gates[:, 3 * h :]
    if dh is not None:
        tc = np.tanh(c_new)
        d_o = dh * tc
        dct = dh * o * (1.0 - tc * tc)
        if dc is not None:
            dct = dct + dc
    else:
        d_o = np.zeros_like(c)
        dct = np.zeros_like(c) if dc is None else dc
    dpre = np.empty_like(gates)
    dpre[:, :h] = (dct * g) * i * (1.0 - i)
    dpre[:, h : 2 * h] = (dct * c) * f * (1.0 - f)
    dpre[:, 2 * h : 3 * h] = d_o * o * (1.0 - o)
    dpre[:, 3 * h :] = (dct * i) * (1.0 - g * g)
    dc_prev = dct * f
    return dpre, dc_prev


def sigmoid(x: np.ndarray) -> np.ndarray:
    return _sigmoid(np.ascontiguousarray(x))
