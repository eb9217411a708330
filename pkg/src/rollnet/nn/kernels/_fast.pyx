# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gate kernels. Semantics mirror kernels/pure.py exactly."""

import numpy as np

cimport cython
from libc.math cimport exp, expf, tanh, tanhf

BACKEND = "compiled"

ctypedef fused real:
    float
    double


cdef inline real _sig(real x) noexcept nogil:
    cdef real e
    if real is float:
        if x >= 0:
            return <float>1.0 / (<float>1.0 + expf(-x))
        e = expf(x)
        return e / (<float>1.0 + e)
    else:
        if x >= 0:
            return 1.0 / (1.0 + exp(-x))
        e = exp(x)
        return e / (1.0 + e)


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


def lstm_gates_forward(real[:, ::1] pre, real[:, ::1] c):
    """Fused gate activation and cell update; see pure.lstm_gates_forward."""
    cdef Py_ssize_t B = pre.shape[0]
    cdef Py_ssize_t H = c.shape[1]
    if pre.shape[1] != 4 * H or c.shape[0] != B:
        raise ValueError("lstm_gates_forward: inconsistent shapes")
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    gates_np = np.empty((B, 4 * H), dtype=dt)
    c_new_np = np.empty((B, H), dtype=dt)
    h_new_np = np.empty((B, H), dtype=dt)
    cdef real[:, ::1] gates = gates_np
    cdef real[:, ::1] c_new = c_new_np
    cdef real[:, ::1] h_new = h_new_np
    cdef Py_ssize_t b, j
    cdef real gi, gf, go, gg, cn
    with nogil:
        for b in range(B):
            for j in range(H):
                gi = _sig(pre[b, j])
                gf = _sig(pre[b, H + j])
                go = _sig(pre[b, 2 * H + j])
                gg = _tanh(pre[b, 3 * H + j])
                cn = gf * c[b, j] + gi * gg
                gates[b, j] = gi
                gates[b, H + j] = gf
                gates[b, 2 * H + j] = go
                gates[b, 3 * H + j] = gg
                c_new[b, j] = cn
                h_new[b, j] = go * _tanh(cn)
    return gates_np, c_new_np, h_new_np


def lstm_gates_backward(real[:, ::1] gates, real[:, ::1] c, real[:, ::1] c_new, dh, dc):
    """Backward through gate nonlinearities; see pure.lstm_gates_backward."""
    cdef Py_ssize_t B = gates.shape[0]
    cdef Py_ssize_t H = c.shape[1]
    if real is float:
        dt = np.float32
    else:
        dt = np.float64
    if dh is None:
        dh = np.zeros((B, H), dtype=dt)
    if dc is None:
        dc = np.zeros((B, H), dtype=dt)
    dpre_np = np.empty((B, 4 * H), dtype=dt)
    dc_prev_np = np.empty((B, H), dtype=dt)
    cdef real[:, ::1] dh_v = np.ascontiguousarray(dh, dtype=dt)
    cdef real[:, ::1] dc_v = np.ascontiguousarray(dc, dtype=dt)
    cdef real[:, ::1] dpre = dpre_np
    cdef real[:, ::1] dc_prev = dc_prev_np
    cdef Py_ssize_t b, j
    cdef real gi, gf, go, gg, tc, d_o, dct
    with nogil:
        for b in range(B):
            for j in range(H):
                gi = gates[b, j]
                gf = gates[b, H + j]
                go = gates[b, 2 * H + j]
                gg = gates[b, 3 * H + j]
                tc = _tanh(c_new[b, j])
                d_o = dh_v[b, j] * tc
                dct = dh_v[b, j] * go * (<real>1.0 - tc * tc) + dc_v[b, j]
                dpre[b, j] = (dct * gg) * gi * (<real>1.0 - gi)
                dpre[b, H + j] = (dct * c[b, j]) * gf * (<real>1.0 - gf)
                dpre[b, 2 * H + j] = d_o * go * (<real>1.0 - go)
                dpre[b, 3 * H + j] = (dct * gi) * (<real>1.0 - gg * gg)
                dc_prev[b, j] = dct * gf
    return dpre_np, dc_prev_np
