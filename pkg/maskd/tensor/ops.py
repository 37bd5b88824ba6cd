"""Differentiable operations over Tensor.

Each op computes its output with numpy and, when a tape is active and an
input requires grad, records a closure mapping the output gradient to the
input gradients. Broadcasting is limited to numpy's rules and is undone in
the gradient by summing over the broadcast axes.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from maskd.tensor.tensor import ComputationTape, GradRule, Tensor, active_tape
from maskd.types import DimensionError, DivergenceUndefined, InvariantViolation, NumericError

# Probability floor inside logarithms for no-grad KL numerics
PROB_FLOOR = 1e-12


# ─────────────────────────────────────────────────────────────────────────────
# Recording helpers
# ─────────────────────────────────────────────────────────────────────────────


def _as_tensor(x: Tensor | float | np.ndarray) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tape_for(inputs: tuple[Tensor, ...]) -> ComputationTape | None:
    tape = active_tape()
    if tape is None or not any(t.requires_grad for t in inputs):
        return None
    return tape


def _result(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], rule: GradRule) -> Tensor:
    if not np.isfinite(data).all():
        raise NumericError(f"{op} produced non-finite values")
    tape = _tape_for(inputs)
    out = Tensor._wrap(np.asarray(data, dtype=np.float64), requires_grad=tape is not None)
    if tape is not None:
        tape.record(op, inputs, out, rule)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum grad down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape) from None


# ─────────────────────────────────────────────────────────────────────────────
# Elementwise arithmetic
# ─────────────────────────────────────────────────────────────────────────────


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("add", a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result("add", a.data + b.data, (a, b), rule)


def sub(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("sub", a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result("sub", a.data - b.data, (a, b), rule)


def mul(a: Tensor | float, b: Tensor | float) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _broadcast_shape("mul", a, b)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result("mul", a.data * b.data, (a, b), rule)


def scale(a: Tensor, c: float) -> Tensor:
    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * c,)

    return _result("scale", a.data * c, (a,), rule)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * out,)

    return _result("exp", out, (a,), rule)


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = a.data
    c = math.sqrt(2.0 / math.pi)
    inner = c * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        d_inner = c * (1.0 + 3 * 0.044715 * x**2)
        local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner
        return (g * local,)

    return _result("gelu", out, (a,), rule)


# ─────────────────────────────────────────────────────────────────────────────
# Reductions and shape
# ─────────────────────────────────────────────────────────────────────────────


def sum_(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result("sum", np.asarray(out), (a,), rule)


def mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def stack(tensors: list[Tensor]) -> Tensor:
    """Stack same-shape tensors along a new leading axis."""
    if not tensors:
        raise DimensionError("stack", ())
    first = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != first:
            raise DimensionError("stack", first, t.shape)
    inputs = tuple(tensors)

    def rule(g: np.ndarray) -> tuple[np.ndarray, ...]:
        return tuple(g[i] for i in range(len(inputs)))

    return _result("stack", np.stack([t.data for t in inputs]), inputs, rule)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError("reshape", a.shape, shape) from None

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(a.shape),)

    return _result("reshape", out, (a,), rule)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(np.argsort(axes))

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(g, inverse),)

    return _result("transpose", np.transpose(a.data, axes), (a,), rule)


def take_rows(a: Tensor, rows: slice | np.ndarray) -> Tensor:
    """Select rows along the first axis."""

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(a.data)
        if isinstance(rows, slice):
            full[rows] = g
        else:
            np.add.at(full, rows, g)
        return (full,)

    return _result("take_rows", a.data[rows], (a,), rule)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` by integer id."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise DimensionError("embedding", table.shape, (int(ids.min()), int(ids.max())))

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _result("embedding", table.data[ids], (table,), rule)


# ─────────────────────────────────────────────────────────────────────────────
# Linear algebra
# ─────────────────────────────────────────────────────────────────────────────


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; batched when both operands share leading dimensions.

    Raises:
        DimensionError: If inner or leading dimensions disagree
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError("matmul", a.shape, b.shape)
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError("matmul", a.shape, b.shape)

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        if b.ndim == 2 and gb.ndim > 2:
            gb = gb.reshape(-1, *b.shape).sum(axis=0)
        return ga, gb

    return _result("matmul", a.data @ b.data, (a, b), rule)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply gain and bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    d = x.shape[-1]

    def rule(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g_gain = _unbroadcast(g * xhat, gain.shape)
        g_bias = _unbroadcast(g, bias.shape)
        gx_hat = g * gain.data
        gx = (inv / d) * (
            d * gx_hat - gx_hat.sum(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True)
        )
        return gx, g_gain, g_bias

    return _result("layer_norm", xhat * gain.data + bias.data, (x, gain, bias), rule)


# ─────────────────────────────────────────────────────────────────────────────
# Softmax family
# ─────────────────────────────────────────────────────────────────────────────


def _check_mask(logits: Tensor, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != logits.shape and mask.shape != logits.shape[-mask.ndim :]:
        raise DimensionError("softmax_rows_with_additive_mask", logits.shape, mask.shape)
    if mask.shape != logits.shape and mask.ndim < 2:
        raise DimensionError("softmax_rows_with_additive_mask", logits.shape, mask.shape)
    if not np.all((mask == 0.0) | np.isneginf(mask)):
        raise InvariantViolation("attention mask entries must be 0 or -inf")
    return mask


def softmax_rows_with_additive_mask(logits: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise softmax of ``logits + mask`` with max subtraction.

    ``mask`` has the same shape as ``logits`` or matches its trailing two
    dimensions (shared across heads). Masked entries come out exactly 0 and a
    row whose entries are all masked comes out all zeros.
    """
    mask = _check_mask(logits, mask)
    z = logits.data + mask
    row_max = z.max(axis=-1, keepdims=True)
    dead = np.isneginf(row_max)
    shifted = z - np.where(dead, 0.0, row_max)
    e = np.exp(shifted)
    totals = e.sum(axis=-1, keepdims=True)
    probs = np.where(dead, 0.0, e / np.where(dead, 1.0, totals))

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (probs * (g - (g * probs).sum(axis=-1, keepdims=True)),)

    return _result("softmax_rows_with_additive_mask", probs, (logits,), rule)


def log_softmax(a: Tensor) -> Tensor:
    """Log-softmax over the last axis."""
    out = special.log_softmax(a.data, axis=-1)
    probs = np.exp(out)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _result("log_softmax", out, (a,), rule)


def cross_entropy_rows(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError("cross_entropy_rows", logits.shape, targets.shape)
    rows = np.arange(len(targets))
    logp = special.log_softmax(logits.data, axis=-1)
    loss = -logp[rows, targets].mean()
    probs = np.exp(logp)

    def rule(g: np.ndarray) -> tuple[np.ndarray]:
        grad = probs.copy()
        grad[rows, targets] -= 1.0
        return (grad * (g / len(targets)),)

    return _result("cross_entropy_rows", np.asarray(loss), (logits,), rule)


# ─────────────────────────────────────────────────────────────────────────────
# No-grad divergence numerics
# ─────────────────────────────────────────────────────────────────────────────


def reverse_kl_rows(p: Tensor, q: Tensor) -> Tensor:
    """Row-wise KL(p || q) = sum_y p log(p / q), with 0 log(0/q) = 0.

    Inputs are probability rows; no gradient is recorded. Results are
    clamped at 0 so rounding never produces a negative divergence.

    Raises:
        DimensionError: If p and q differ in shape
        DivergenceUndefined: If q is zero where p is positive
    """
    if p.shape != q.shape or p.ndim != 2:
        raise DimensionError("reverse_kl_rows", p.shape, q.shape)
    pd, qd = p.data, q.data
    for name, rows in (("p", pd), ("q", qd)):
        if not np.allclose(rows.sum(axis=-1), 1.0, atol=1e-6):
            raise InvariantViolation(f"reverse_kl_rows: rows of {name} are not probability vectors")
    support = pd > 0
    if np.any(support & (qd <= 0)):
        raise DivergenceUndefined("q assigns zero probability where p has mass; apply the probability floor upstream")
    log_ratio = np.log(np.maximum(pd, PROB_FLOOR)) - np.log(np.maximum(qd, PROB_FLOOR))
    terms = np.where(support, pd * log_ratio, 0.0)
    return Tensor._wrap(np.maximum(terms.sum(axis=-1), 0.0), requires_grad=False)
