"""Central finite-difference verification of tape gradients.

The check perturbs sampled coordinates of each parameter by +-eps,
re-evaluates the scalar function, and compares (f+ - f-) / 2eps against
the reverse-mode gradient. The function under test must be deterministic:
fixed seeds, frozen dropout masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from rollnet.nn.tensor import ParamStore, Tape, Tensor, backward


@dataclass
class GradCheckReport:
    """Per-parameter worst relative error and the coordinates checked."""

    per_param: dict[str, float] = field(default_factory=dict)
    samples: int = 0
    eps: float = 0.0

    @property
    def worst(self) -> float:
        return max(self.per_param.values()) if self.per_param else 0.0

    def passed(self, threshold: float) -> bool:
        return self.worst <= threshold

    def lines(self) -> list[str]:
        width = max((len(n) for n in self.per_param), default=0)
        return [f"{name:<{width}}  max rel err {err:.3e}" for name, err in sorted(self.per_param.items())]


def relative_error(g_ad: float, g_fd: float, floor: float = 1e-8) -> float:
    return abs(g_ad - g_fd) / max(abs(g_ad), abs(g_fd), floor)


def finite_diff_check(
    f: Callable[[ParamStore], Tensor],
    params: ParamStore,
    eps: float = 1e-5,
    samples: int = 20,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients of f against central differences.

    f maps the parameter store to a scalar Tensor. Checks up to `samples`
    randomly chosen coordinates per parameter (all of them for small ones).
    """
    rng = rng or np.random.default_rng(0)
    with Tape() as tape:
        loss = f(params)
    grads = backward(loss, tape, params)

    report = GradCheckReport(samples=samples, eps=eps)
    for name, tensor in params.items():
        n = tensor.data.size
        if n <= samples:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=samples, replace=False)
        worst = 0.0
        gflat = grads[name].reshape(-1)
        for idx in coords:
            multi = np.unravel_index(idx, tensor.data.shape)
            orig = tensor.data[multi]
            tensor.data[multi] = orig + eps
            f_plus = float(f(params).data)
            tensor.data[multi] = orig - eps
            f_minus = float(f(params).data)
            tensor.data[multi] = orig
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(gflat[idx]), g_fd))
        report.per_param[name] = worst
    return report
