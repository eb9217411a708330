"""Deterministic weight initializers."""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], dtype=np.float32) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out)), fans from the 2-D view."""
    if len(shape) == 3:  # conv kernels: (C_out, C_in, K)
        fan_in = shape[1] * shape[2]
        fan_out = shape[0] * shape[2]
    else:
        fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def orthogonal(rng: np.random.Generator, n: int, dtype=np.float32) -> np.ndarray:
    """Random n x n orthogonal matrix with a sign-fixed QR decomposition."""
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q.astype(dtype)


def lstm_recurrent(rng: np.random.Generator, units: int, dtype=np.float32) -> np.ndarray:
    """(units, 4*units) recurrent weights, one orthogonal block per gate."""
    return np.concatenate([orthogonal(rng, units, dtype) for _ in range(4)], axis=1)


def lstm_bias(units: int, forget_bias: float = 1.0, dtype=np.float32) -> np.ndarray:
    """Zero biases except the forget-gate block (second of four)."""
    b = np.zeros(4 * units, dtype=dtype)
    b[units : 2 * units] = forget_bias
    return b
