"""Tensor value type and the computation tape that records gradient rules.

Recording is opt-in: operations only append to a tape while one is active
(``with ComputationTape() as tape: ...``). Outside a tape nothing is
recorded, which is how no-grad forwards (teacher, auxiliary pass) are run.
The active tape lives in a ContextVar, so a tape is confined to the thread
that opened it.
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from maskd.types import BrokenInvariant, NumericError, RankError

logger = logging.getLogger(__name__)

GradRule = Callable[[np.ndarray], tuple[np.ndarray | None, ...]]

_ACTIVE_TAPE: ContextVar[ComputationTape | None] = ContextVar("maskd_active_tape", default=None)


class Tensor:
    """Dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data: object, requires_grad: bool = False, name: str | None = None) -> None:
        arr = np.array(data, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError(f"Tensor {name or '<unnamed>'} holds non-finite values")
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def _wrap(cls, data: np.ndarray, requires_grad: bool) -> Tensor:
        """Adopt an already-validated float64 array without copying."""
        t = cls.__new__(cls)
        t.data = data
        t.grad = None
        t.requires_grad = requires_grad
        t.name = None
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise RankError("item", self.shape, ())
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the gradient rules live in ops.py
    def __add__(self, other: Tensor | float) -> Tensor:
        from maskd.tensor import ops

        return ops.add(self, other)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from maskd.tensor import ops

        return ops.sub(self, other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from maskd.tensor import ops

        return ops.mul(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        from maskd.tensor import ops

        return ops.matmul(self, other)

    def __neg__(self) -> Tensor:
        from maskd.tensor import ops

        return ops.scale(self, -1.0)


@dataclass
class TapeEntry:
    """One executed operation: its inputs, its output and its local gradient rule."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    rule: GradRule


class ComputationTape:
    """Ordered record of executed operations for reverse-mode replay."""

    def __init__(self) -> None:
        self.entries: list[TapeEntry] = []
        self._token = None

    def __enter__(self) -> ComputationTape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: tuple[Tensor, ...], output: Tensor, rule: GradRule) -> None:
        self.entries.append(TapeEntry(op=op, inputs=inputs, output=output, rule=rule))


def active_tape() -> ComputationTape | None:
    return _ACTIVE_TAPE.get()


@contextmanager
def no_record() -> Iterator[None]:
    """Suspend recording (the stop-gradient region)."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)


def backward(loss: Tensor, tape: ComputationTape) -> None:
    """Accumulate dLoss/dTensor into ``.grad`` of every leaf that requires grad.

    Entries are replayed newest-first; since they were appended in execution
    order this is a reverse topological order and each entry is visited once.

    Raises:
        RankError: If loss is not a scalar
        BrokenInvariant: If loss was not produced on this tape
    """
    if loss.size != 1:
        raise RankError("backward", loss.shape, ())
    produced = {id(e.output) for e in tape.entries}
    if id(loss) not in produced:
        raise BrokenInvariant("backward: loss was not produced on this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}

    for entry in reversed(tape.entries):
        g = grads.pop(id(entry.output), None)
        if g is None:
            continue
        for inp, ig in zip(entry.inputs, entry.rule(g), strict=True):
            if ig is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + ig
            else:
                grads[key] = ig
            if key not in produced:
                leaves[key] = inp

    for key, leaf in leaves.items():
        g = grads.get(key)
        if g is None:
            continue
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g

    logger.debug(f"backward replayed {len(tape.entries)} entries into {len(leaves)} leaves")
