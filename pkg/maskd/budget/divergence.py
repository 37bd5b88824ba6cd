"""Token-wise reverse-KL difficulty from the auxiliary forward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from maskd.tensor.ops import PROB_FLOOR, reverse_kl_rows
from maskd.tensor.tensor import Tensor
from maskd.types import DimensionError, NumericError


@dataclass(frozen=True)
class DivergenceTrace:
    """Per-response-position reverse KL r_n (finite, nonnegative)."""

    r: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=np.float64)
        object.__setattr__(self, "r", r)
        if r.ndim != 1:
            raise DimensionError("DivergenceTrace", r.shape)
        if not np.isfinite(r).all():
            raise NumericError("divergence trace holds non-finite entries")
        if np.any(r < 0):
            raise NumericError(f"divergence trace holds negative entries (min {r.min()})")

    def __len__(self) -> int:
        return len(self.r)

    @property
    def mean(self) -> float:
        return float(self.r.mean()) if len(self.r) else 0.0


def _logits(x: Tensor | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def tempered_probs(logits: Tensor | np.ndarray, tau: float) -> np.ndarray:
    """softmax(logits / tau) over the last axis, floored at PROB_FLOOR."""
    return np.maximum(softmax(_logits(logits) / tau, axis=-1), PROB_FLOOR)


def tokenwise_reverse_kl(
    student_logits: Tensor | np.ndarray,
    teacher_logits: Tensor | np.ndarray,
    tau: float = 1.0,
    tau_scaled: bool = True,
) -> DivergenceTrace:
    """r_n = KL(p_s || p_t) per row, computed without recording gradients.

    Args:
        student_logits: Auxiliary (causal) student logits on response rows
        teacher_logits: Teacher logits on the same rows
        tau: Distillation temperature
        tau_scaled: Divide both logit blocks by tau before the softmax

    Raises:
        DimensionError: If the two blocks differ in shape
    """
    s, t = _logits(student_logits), _logits(teacher_logits)
    if s.shape != t.shape or s.ndim != 2:
        raise DimensionError("tokenwise_reverse_kl", s.shape, t.shape)
    temp = tau if tau_scaled else 1.0
    p_s = Tensor._wrap(tempered_probs(s, temp), requires_grad=False)
    p_t = Tensor._wrap(tempered_probs(t, temp), requires_grad=False)
    return DivergenceTrace(reverse_kl_rows(p_s, p_t).data)
