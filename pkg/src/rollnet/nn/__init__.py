"""Minimal tensor library: tape autodiff plus the model's primitives."""

from rollnet.nn.tensor import (
    DuplicateParameter,
    NotScalarLoss,
    ParamStore,
    ShapeMismatch,
    Tape,
    Tensor,
    as_tensor,
    backward,
    checked,
    set_checked,
)

__all__ = [
    "DuplicateParameter",
    "NotScalarLoss",
    "ParamStore",
    "ShapeMismatch",
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "checked",
    "set_checked",
]
