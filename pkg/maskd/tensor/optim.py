"""Adam optimizer with explicit, persisted moment state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from maskd.tensor.tensor import Tensor
from maskd.types import UnreadyParameter


@dataclass
class AdamState:
    """First/second moments per parameter slot plus the shared step count."""

    step: int = 0
    m: dict[int, np.ndarray] = field(default_factory=dict)
    v: dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: list[Tensor],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one bias-corrected Adam update in place.

    Moments are keyed by the parameter's index in ``params``, so the same
    ordering must be passed on every call.

    Raises:
        UnreadyParameter: If any parameter has no gradient
    """
    for i, p in enumerate(params):
        if p.grad is None:
            raise UnreadyParameter(f"parameter {p.name or i} has no gradient")

    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i, p in enumerate(params):
        g = p.grad
        m = state.m.get(i)
        v = state.v.get(i)
        m = (1.0 - beta1) * g if m is None else beta1 * m + (1.0 - beta1) * g
        v = (1.0 - beta2) * g * g if v is None else beta2 * v + (1.0 - beta2) * g * g
        state.m[i] = m
        state.v[i] = v
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def zero_grad(params: list[Tensor]) -> None:
    for p in params:
        p.grad = None
