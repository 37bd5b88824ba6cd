"""Small pre-norm causal decoder over multimodal token sequences.

The forward pass takes an arbitrary additive mask (shared by every layer and
head) and can export the layer- and head-averaged post-softmax attention map.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np

from maskd.masking.masks import AttentionMaskMatrix
from maskd.model.config import ModelConfig
from maskd.tensor import ops
from maskd.tensor.rng import rng_stream
from maskd.tensor.tensor import Tensor, active_tape, no_record
from maskd.types import BrokenInvariant, CapacityError, DimensionError, InvariantViolation, SegmentLayout, Sequence

logger = logging.getLogger(__name__)

INIT_SCALE = 0.02
FFN_EXPANSION = 4


class Model:
    """Named parameters plus the config that shaped them."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]) -> None:
        self.config = config
        self.params = params

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def parameters(self) -> list[Tensor]:
        """Parameters in creation order (stable across save/load)."""
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def freeze(self) -> Model:
        for p in self.params.values():
            p.requires_grad = False
            p.grad = None
        return self

    def clone(self) -> Model:
        """Bitwise copy with independent storage."""
        params = {}
        for name, p in self.params.items():
            t = Tensor(p.data.copy(), requires_grad=p.requires_grad, name=name)
            params[name] = t
        return Model(copy.deepcopy(self.config), params)


@dataclass
class ForwardOutput:
    logits: Tensor
    attention_avg: Tensor | None = None


def build_model(config: ModelConfig) -> Model:
    """Initialize parameters from the config seed.

    Weights are N(0, 0.02), biases zero, layer-norm gains one. Parameters
    are drawn in a fixed order from one stream, so the same seed gives
    bit-identical parameters.
    """
    rng = rng_stream(config.seed, 0)
    d, v = config.d_model, config.vocab_size
    params: dict[str, Tensor] = {}

    def normal(name: str, *shape: int) -> None:
        params[name] = Tensor(rng.normal(0.0, INIT_SCALE, size=shape), requires_grad=True, name=name)

    def const(name: str, value: float, *shape: int) -> None:
        params[name] = Tensor(np.full(shape, value), requires_grad=True, name=name)

    normal("tok_emb", v, d)
    normal("pos_emb", config.max_seq_len, d)
    for layer in range(config.n_layers):
        p = f"blocks.{layer}"
        const(f"{p}.ln1.gain", 1.0, d)
        const(f"{p}.ln1.bias", 0.0, d)
        for proj in ("q", "k", "v", "o"):
            normal(f"{p}.attn.w{proj}", d, d)
            const(f"{p}.attn.b{proj}", 0.0, d)
        const(f"{p}.ln2.gain", 1.0, d)
        const(f"{p}.ln2.bias", 0.0, d)
        normal(f"{p}.ffn.w1", d, FFN_EXPANSION * d)
        const(f"{p}.ffn.b1", 0.0, FFN_EXPANSION * d)
        normal(f"{p}.ffn.w2", FFN_EXPANSION * d, d)
        const(f"{p}.ffn.b2", 0.0, d)
    const("ln_f.gain", 1.0, d)
    const("ln_f.bias", 0.0, d)
    normal("head.weight", d, v)

    model = Model(config, params)
    logger.debug(f"Built model with {model.num_parameters()} parameters (seed={config.seed})")
    return model


def _mask_entries(mask: AttentionMaskMatrix | np.ndarray) -> np.ndarray:
    return mask.entries if isinstance(mask, AttentionMaskMatrix) else np.asarray(mask, dtype=np.float64)


def forward(
    model: Model,
    seq: Sequence,
    mask: AttentionMaskMatrix | np.ndarray,
    capture_attention: bool = False,
    record_grad: bool = False,
) -> ForwardOutput:
    """Run the decoder over one sequence under ``mask``.

    With ``record_grad`` the ops are recorded on the caller's active tape;
    without it nothing is recorded even if a tape is open.

    Raises:
        CapacityError: If the sequence is longer than max_seq_len
        DimensionError: If the mask is not N x N
        InvariantViolation: If the mask hides a position from itself
    """
    entries = _mask_entries(mask)
    n = len(seq)
    if n > model.config.max_seq_len:
        raise CapacityError(f"sequence of {n} tokens exceeds max_seq_len={model.config.max_seq_len}")
    if entries.shape != (n, n):
        raise DimensionError("forward mask", (n, n), entries.shape)
    if np.any(np.diagonal(entries) != 0.0):
        raise InvariantViolation("mask must let every position attend to itself")

    if record_grad:
        if active_tape() is None:
            raise BrokenInvariant("record_grad=True requires an active ComputationTape")
        return _forward(model, seq.token_ids, entries, capture_attention)
    with no_record():
        return _forward(model, seq.token_ids, entries, capture_attention)


def _forward(model: Model, ids: np.ndarray, mask: np.ndarray, capture: bool) -> ForwardOutput:
    cfg = model.config
    n = len(ids)
    h_count, dh = cfg.n_heads, cfg.head_dim
    inv_sqrt = 1.0 / math.sqrt(dh)
    attn_sum = np.zeros((n, n)) if capture else None
    P = model.params

    x = ops.add(ops.embedding(P["tok_emb"], ids), ops.take_rows(P["pos_emb"], slice(0, n)))

    for layer in range(cfg.n_layers):
        p = f"blocks.{layer}"
        h = ops.layer_norm(x, P[f"{p}.ln1.gain"], P[f"{p}.ln1.bias"])

        def heads(proj: str) -> Tensor:
            lin = ops.add(ops.matmul(h, P[f"{p}.attn.w{proj}"]), P[f"{p}.attn.b{proj}"])
            return ops.transpose(ops.reshape(lin, (n, h_count, dh)), (1, 0, 2))

        q, k, v = heads("q"), heads("k"), heads("v")
        scores = ops.scale(ops.matmul(q, ops.transpose(k, (0, 2, 1))), inv_sqrt)
        probs = ops.softmax_rows_with_additive_mask(scores, mask)
        if attn_sum is not None:
            attn_sum += probs.data.mean(axis=0)
        ctx = ops.reshape(ops.transpose(ops.matmul(probs, v), (1, 0, 2)), (n, cfg.d_model))
        x = ops.add(x, ops.add(ops.matmul(ctx, P[f"{p}.attn.wo"]), P[f"{p}.attn.bo"]))

        h2 = ops.layer_norm(x, P[f"{p}.ln2.gain"], P[f"{p}.ln2.bias"])
        ff = ops.gelu(ops.add(ops.matmul(h2, P[f"{p}.ffn.w1"]), P[f"{p}.ffn.b1"]))
        x = ops.add(x, ops.add(ops.matmul(ff, P[f"{p}.ffn.w2"]), P[f"{p}.ffn.b2"]))

    logits = ops.matmul(ops.layer_norm(x, P["ln_f.gain"], P["ln_f.bias"]), P["head.weight"])
    attention = Tensor._wrap(attn_sum / cfg.n_layers, requires_grad=False) if attn_sum is not None else None
    return ForwardOutput(logits=logits, attention_avg=attention)


def extract_response_attention(attention_avg: Tensor | None, layout: SegmentLayout) -> Tensor:
    """Restrict the averaged attention map to response rows x response columns.

    Raises:
        BrokenInvariant: If no attention map was captured
    """
    if attention_avg is None:
        raise BrokenInvariant("extract_response_attention needs a forward run with capture_attention=True")
    if attention_avg.shape != (layout.total, layout.total):
        raise DimensionError("extract_response_attention", attention_avg.shape, (layout.total, layout.total))
    r = slice(layout.response.start, layout.response.end)
    return Tensor._wrap(attention_avg.data[r, r].copy(), requires_grad=False)
