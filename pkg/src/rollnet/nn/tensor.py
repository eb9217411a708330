"""Shape-carrying tensors with a reverse-mode gradient tape.

A Tensor wraps a numpy array plus a requires_grad flag. Primitive
operations (see ops.py) record themselves on the currently active Tape;
backward() replays the records in reverse and accumulates gradients into
Tensor.grad. Tapes nest, records always go to the innermost one.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes are incompatible for the requested primitive."""


class NotScalarLoss(ValueError):
    """backward() was asked to differentiate a non-scalar tensor."""


class DuplicateParameter(ValueError):
    """A parameter name was registered twice in a ParamStore."""


_checked = False


def set_checked(flag: bool) -> None:
    """Enable or disable finiteness assertions on every tensor created."""
    global _checked
    _checked = bool(flag)


@contextlib.contextmanager
def checked() -> Iterator[None]:
    """Context manager form of set_checked, restores the previous state."""
    global _checked
    prev = _checked
    _checked = True
    try:
        yield
    finally:
        _checked = prev


class Tensor:
    """Immutable-by-convention numeric array with gradient bookkeeping.

    `data` is only mutated by the optimizer, never by primitives.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if _checked and not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite value in tensor (checked mode)")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Same values, cut off from the tape (no gradient flows through)."""
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # Convenience operators; the real work happens in ops.py.
    def __add__(self, other):
        from rollnet.nn import ops

        return ops.add(self, other)

    def __mul__(self, other):
        from rollnet.nn import ops

        return ops.mul(self, other)

    def __sub__(self, other):
        from rollnet.nn import ops

        return ops.sub(self, other)

    def __neg__(self):
        from rollnet.nn import ops

        return ops.neg(self)


def as_tensor(x, dtype=None) -> Tensor:
    """Wrap x in a constant Tensor unless it already is a Tensor."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x, requires_grad=False, dtype=dtype)


class TapeRecord:
    """One primitive application: its operands, results, and vjp.

    `vjp` receives one cotangent per output (None when that output never
    received a gradient) and returns one gradient per input (None allowed
    for inputs that do not require grad).
    """

    __slots__ = ("inputs", "outputs", "vjp")

    def __init__(self, inputs: tuple[Tensor, ...], outputs: tuple[Tensor, ...], vjp: Callable):
        self.inputs = inputs
        self.outputs = outputs
        self.vjp = vjp


_tape_stack: list["Tape"] = []


class Tape:
    """Ordered record of primitive applications.

    Records are appended in execution order, which is a topological order
    of the data flow, so backward() can walk the list once in reverse.
    """

    def __init__(self):
        self.records: list[TapeRecord] = []

    def __enter__(self) -> "Tape":
        _tape_stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        popped = _tape_stack.pop()
        assert popped is self

    def __len__(self) -> int:
        return len(self.records)


def active_tape() -> Tape | None:
    return _tape_stack[-1] if _tape_stack else None


def record(inputs: tuple[Tensor, ...], outputs: tuple[Tensor, ...], vjp: Callable) -> None:
    """Append a primitive application to the active tape, if any."""
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        tape.records.append(TapeRecord(inputs, outputs, vjp))


class ParamStore:
    """Name -> Tensor map of all trainable parameters."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise DuplicateParameter(name)
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._params.items()}

    def size(self) -> int:
        return sum(v.data.size for v in self._params.values())

    def astype(self, dtype) -> "ParamStore":
        """Deep copy with every parameter cast to dtype (for 64-bit checks)."""
        out = ParamStore()
        for name, t in self._params.items():
            out.add(name, t.data.astype(dtype))
        return out

    def load(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place; shapes must match."""
        for name, t in self._params.items():
            if name not in values:
                raise KeyError(f"checkpoint missing parameter {name!r}")
            arr = np.asarray(values[name], dtype=t.data.dtype)
            if arr.shape != t.data.shape:
                raise ShapeMismatch(
                    f"parameter {name!r}: stored shape {arr.shape} != model shape {t.data.shape}"
                )
            t.data = arr.copy()


def backward(loss: Tensor, tape: Tape, params: ParamStore | None = None) -> dict[str, np.ndarray]:
    """Reverse sweep over the tape, seeding d(loss)/d(loss) = 1.

    Returns a name -> gradient map covering every parameter in `params`;
    parameters off the loss path get exact zeros. Gradients also stay
    available as .grad on any leaf tensors that required them.
    """
    if loss.data.shape != ():
        raise NotScalarLoss(f"loss must be a scalar, got shape {loss.data.shape}")
    for rec in tape.records:
        for t in rec.inputs:
            t.grad = None
        for t in rec.outputs:
            t.grad = None
    loss.grad = np.ones((), dtype=loss.data.dtype)
    for rec in reversed(tape.records):
        out_grads = tuple(t.grad for t in rec.outputs)
        if all(g is None for g in out_grads):
            continue
        in_grads = rec.vjp(*out_grads)
        for t, g in zip(rec.inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            if t.grad is None:
                t.grad = g
            else:
                t.grad = t.grad + g
    if params is None:
        return {}
    return {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for name, t in params.items()
    }
