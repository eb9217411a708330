"""Differentiable primitives.

Every operation validates shapes up front, computes its forward value with
numpy, and registers a vector-Jacobian product on the active tape. The
LSTM cell and the note-axis convolution are the hot spots; their inner
math is delegated to the kernels backend (compiled or pure).
"""

from __future__ import annotations

import numpy as np

from rollnet.nn import kernels
from rollnet.nn.tensor import ShapeMismatch, Tensor, as_tensor, record


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g over the axes that were broadcast to reach g.shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, requires_grad=a.requires_grad or b.requires_grad)

    def vjp(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    record((a, b), (out,), vjp)
    return out


def _binary(a, b, fwd, da, db) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeMismatch(f"{fwd.__name__}: {a.data.shape} vs {b.data.shape}") from exc
    out = Tensor(data, requires_grad=a.requires_grad or b.requires_grad)

    def vjp(g):
        ga = _unbroadcast(da(g, a.data, b.data), a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(db(g, a.data, b.data), b.data.shape) if b.requires_grad else None
        return ga, gb

    record((a, b), (out,), vjp)
    return out


def add(a, b) -> Tensor:
    return _binary(a, b, np.add, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b) -> Tensor:
    return _binary(a, b, np.subtract, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b) -> Tensor:
    return _binary(a, b, np.multiply, lambda g, x, y: g * y, lambda g, x, y: g * x)


def neg(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(-x.data, requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (-g,))
    return out


def scale(x, s: float) -> Tensor:
    """Multiply by a python scalar constant."""
    x = as_tensor(x)
    s = x.data.dtype.type(s)
    out = Tensor(x.data * s, requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (g * s,))
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    y[~pos] = ez / (1.0 + ez)
    out = Tensor(y, requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (g * y * (1.0 - y),))
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    out = Tensor(y, requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (g * (1.0 - y * y),))
    return out


def log(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.log(x.data), requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (g / x.data,))
    return out


def clip(x, lo: float, hi: float) -> Tensor:
    """Clamp to [lo, hi]; gradient passes only where x was strictly inside."""
    x = as_tensor(x)
    d = x.data
    out = Tensor(np.clip(d, lo, hi), requires_grad=x.requires_grad)
    inside = ((d > lo) & (d < hi)).astype(d.dtype)
    record((x,), (out,), lambda g: (g * inside,))
    return out


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    out = Tensor(np.sum(x.data), requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (np.broadcast_to(g, x.data.shape).astype(x.data.dtype, copy=False),))
    return out


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    nd = parts[0].data.ndim
    ax = axis % nd
    for p in parts[1:]:
        if p.data.ndim != nd or p.data.shape[:ax] + p.data.shape[ax + 1 :] != parts[0].data.shape[
            :ax
        ] + parts[0].data.shape[ax + 1 :]:
            raise ShapeMismatch(f"concat axis {axis}: {[p.data.shape for p in parts]}")
    data = np.concatenate([p.data for p in parts], axis=ax)
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parts))
    sizes = [p.data.shape[ax] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        grads = []
        for p, start, stop in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * nd
                idx[ax] = slice(start, stop)
                grads.append(np.ascontiguousarray(g[tuple(idx)]))
            else:
                grads.append(None)
        return tuple(grads)

    record(tuple(parts), (out,), vjp)
    return out


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = Tensor(x.data.reshape(shape), requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (g.reshape(x.data.shape),))
    return out


def permute(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.data.ndim)):
        raise ShapeMismatch(f"permute: axes {axes} for shape {x.data.shape}")
    inv = tuple(np.argsort(axes))
    out = Tensor(np.ascontiguousarray(x.data.transpose(axes)), requires_grad=x.requires_grad)
    record((x,), (out,), lambda g: (np.ascontiguousarray(g.transpose(inv)),))
    return out


def transpose_last2(x) -> Tensor:
    x = as_tensor(x)
    axes = tuple(range(x.data.ndim - 2)) + (x.data.ndim - 1, x.data.ndim - 2)
    return permute(x, axes)


def stack_axis0(parts) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    parts = [as_tensor(p) for p in parts]
    shape = parts[0].data.shape
    for p in parts[1:]:
        if p.data.shape != shape:
            raise ShapeMismatch(f"stack_axis0: {[p.data.shape for p in parts]}")
    out = Tensor(np.stack([p.data for p in parts]), requires_grad=any(p.requires_grad for p in parts))

    def vjp(g):
        return tuple(g[i] if p.requires_grad else None for i, p in enumerate(parts))

    record(tuple(parts), (out,), vjp)
    return out


def split_axis0(x) -> tuple[Tensor, ...]:
    """Split along the leading axis into views of one slice each."""
    x = as_tensor(x)
    n = x.data.shape[0]
    outs = tuple(Tensor(x.data[i], requires_grad=x.requires_grad) for i in range(n))

    def vjp(*gs):
        full = np.zeros_like(x.data)
        for i, g in enumerate(gs):
            if g is not None:
                full[i] = g
        return (full,)

    record((x,), outs, vjp)
    return outs


def conv1d(x, w, b) -> Tensor:
    """Same-padded cross-correlation along the last axis.

    x: (B, C_in, N) or (C_in, N); w: (C_out, C_in, K) with K odd; b: (C_out,).
    Output length equals input length; positions past either edge read zeros.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    squeeze = x.data.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3 or w.data.ndim != 3 or xd.shape[1] != w.data.shape[1]:
        raise ShapeMismatch(f"conv1d: signal {x.data.shape}, kernel {w.data.shape}")
    c_out, c_in, k = w.data.shape
    if k % 2 != 1:
        raise ShapeMismatch(f"conv1d: kernel width {k} must be odd for same padding")
    if b.data.shape != (c_out,):
        raise ShapeMismatch(f"conv1d: bias {b.data.shape}, kernel {w.data.shape}")
    batch, _, n = xd.shape
    pad = (k - 1) // 2
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)  # (B, C_in, N, K)
    patches = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(batch * n, c_in * k)
    wmat = w.data.reshape(c_out, c_in * k)
    out2 = patches @ wmat.T + b.data
    data = out2.reshape(batch, n, c_out).transpose(0, 2, 1)
    if squeeze:
        data = data[0]
    out = Tensor(np.ascontiguousarray(data), requires_grad=x.requires_grad or w.requires_grad or b.requires_grad)

    def vjp(g):
        gd = g[None] if squeeze else g
        g2 = np.ascontiguousarray(gd.transpose(0, 2, 1)).reshape(batch * n, c_out)
        gb = g2.sum(axis=0) if b.requires_grad else None
        gw = (g2.T @ patches).reshape(c_out, c_in, k) if w.requires_grad else None
        gx = None
        if x.requires_grad:
            gpatch = (g2 @ wmat).reshape(batch, n, c_in, k).transpose(0, 2, 1, 3)
            gxp = np.zeros_like(xp)
            for kk in range(k):
                gxp[:, :, kk : kk + n] += gpatch[:, :, :, kk]
            gx = gxp[:, :, pad : pad + n]
            if squeeze:
                gx = gx[0]
            gx = np.ascontiguousarray(gx)
        return gx, gw, gb

    record((x, w, b), (out,), vjp)
    return out


def lstm_cell(x, h, c, wx, wh, b) -> tuple[Tensor, Tensor]:
    """One gated recurrent update, batched over rows.

    x: (B, I) input; h, c: (B, H) previous state; wx: (I, 4H); wh: (H, 4H);
    b: (4H,) with gate blocks ordered input, forget, output, candidate.
    Returns (h_new, c_new); no operand is mutated.
    """
    x, h, c, wx, wh, b = (as_tensor(t) for t in (x, h, c, wx, wh, b))
    bsz, i_dim = x.data.shape if x.data.ndim == 2 else (None, None)
    if (
        x.data.ndim != 2
        or h.data.ndim != 2
        or c.data.shape != h.data.shape
        or wx.data.shape != (i_dim, 4 * h.data.shape[1])
        or wh.data.shape != (h.data.shape[1], 4 * h.data.shape[1])
        or b.data.shape != (4 * h.data.shape[1],)
        or h.data.shape[0] != bsz
    ):
        raise ShapeMismatch(
            "lstm_cell: x "
            f"{x.data.shape}, h {h.data.shape}, c {c.data.shape}, "
            f"wx {wx.data.shape}, wh {wh.data.shape}, b {b.data.shape}"
        )
    pre = x.data @ wx.data + h.data @ wh.data + b.data
    gates, c_new_d, h_new_d = kernels.lstm_gates_forward(np.ascontiguousarray(pre), np.ascontiguousarray(c.data))
    rg = any(t.requires_grad for t in (x, h, c, wx, wh, b))
    h_new = Tensor(h_new_d, requires_grad=rg)
    c_new = Tensor(c_new_d, requires_grad=rg)

    def vjp(dh, dc):
        dpre, dc_prev = kernels.lstm_gates_backward(gates, c.data, c_new_d, dh, dc)
        dx = dpre @ wx.data.T if x.requires_grad else None
        dh_prev = dpre @ wh.data.T if h.requires_grad else None
        dwx = x.data.T @ dpre if wx.requires_grad else None
        dwh = h.data.T @ dpre if wh.requires_grad else None
        db = dpre.sum(axis=0) if b.requires_grad else None
        return dx, dh_prev, dc_prev if c.requires_grad else None, dwx, dwh, db

    record((x, h, c, wx, wh, b), (h_new, c_new), vjp)
    return h_new, c_new


def dropout_mask(shape, rate: float, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Inverted-dropout mask: kept entries carry 1/(1-rate), dropped are 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) * dtype(1.0 / (1.0 - rate)) if rate > 0 else np.ones(shape, dtype)


def dropout(x, rate: float, rng: np.random.Generator | None = None, training: bool = True) -> Tensor:
    """Inverted dropout: identity when not training or rate is zero."""
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    mask = dropout_mask(x.data.shape, rate, rng, x.data.dtype.type)
    return mul(x, Tensor(mask))
