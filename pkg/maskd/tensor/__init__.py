"""Tensor: dense float64 arrays with reverse-mode automatic differentiation.

Usage:
    from maskd.tensor import ComputationTape, Tensor, backward, ops

    w = Tensor(np.ones((2, 2)), requires_grad=True)
    with ComputationTape() as tape:
        loss = ops.sum_(ops.matmul(w, w))
    backward(loss, tape)
    w.grad  # dLoss/dw
"""

from maskd.tensor import ops
from maskd.tensor.ops import matmul, reverse_kl_rows, softmax_rows_with_additive_mask
from maskd.tensor.optim import AdamState, adam_step, zero_grad
from maskd.tensor.rng import rng_stream
from maskd.tensor.tensor import ComputationTape, Tensor, active_tape, backward, no_record

__all__ = [
    "ops",
    # Core
    "Tensor",
    "ComputationTape",
    "active_tape",
    "backward",
    "no_record",
    # Operations
    "matmul",
    "softmax_rows_with_additive_mask",
    "reverse_kl_rows",
    # Optimizer
    "AdamState",
    "adam_step",
    "zero_grad",
    # PRNG
    "rng_stream",
]
