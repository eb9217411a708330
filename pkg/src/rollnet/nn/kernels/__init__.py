"""Gate kernel backend selection.

The compiled extension is preferred when present; set ROLLNET_PURE_PYTHON=1
to force the numpy fallback (used by the benchmark and equivalence tests).
"""

from __future__ import annotations

import os

from rollnet.nn.kernels import pure

if os.environ.get("ROLLNET_PURE_PYTHON", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from rollnet.nn.kernels import _fast as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = pure

BACKEND: str = _impl.BACKEND
lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward
