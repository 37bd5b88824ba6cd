"""Temperature-scaled KL distillation losses over response rows."""

from __future__ import annotations

import numpy as np

from maskd.distill.config import LossKind
from maskd.tensor import ops
from maskd.tensor.tensor import Tensor, no_record
from maskd.types import DimensionError, UnknownOption


def _teacher_log_probs(data: np.ndarray, tau: float) -> Tensor:
    with no_record():
        return ops.log_softmax(ops.scale(Tensor._wrap(data, requires_grad=False), 1.0 / tau))


def kd_loss(
    student_logits: Tensor,
    teacher_logits: Tensor | np.ndarray,
    tau: float,
    kind: LossKind | str = LossKind.REVERSE,
) -> Tensor:
    """Mean over rows of the chosen KL between tempered student and teacher.

    reverse = KL(p_s || p_t), forward = KL(p_t || p_s), mixed = half of each.
    Gradients flow through the student side only; there is no tau^2 factor.

    Raises:
        DimensionError: If the logit blocks differ in shape
        UnknownOption: If kind is not a LossKind
    """
    try:
        kind = LossKind(kind)
    except ValueError:
        raise UnknownOption("loss kind", kind, [k.value for k in LossKind]) from None
    target = teacher_logits.data if isinstance(teacher_logits, Tensor) else np.asarray(teacher_logits, dtype=np.float64)
    if student_logits.shape != target.shape:
        raise DimensionError("kd_loss", student_logits.shape, target.shape)

    log_s = ops.log_softmax(ops.scale(student_logits, 1.0 / tau))
    log_t = _teacher_log_probs(target, tau)

    def reverse() -> Tensor:
        return ops.mean(ops.sum_(ops.mul(ops.exp(log_s), ops.sub(log_s, log_t)), axis=-1))

    def forward() -> Tensor:
        p_t = Tensor._wrap(np.exp(log_t.data), requires_grad=False)
        return ops.mean(ops.sum_(ops.mul(p_t, ops.sub(log_t, log_s)), axis=-1))

    match kind:
        case LossKind.REVERSE:
            return reverse()
        case LossKind.FORWARD:
            return forward()
        case LossKind.MIXED:
            return ops.add(ops.scale(reverse(), 0.5), ops.scale(forward(), 0.5))
