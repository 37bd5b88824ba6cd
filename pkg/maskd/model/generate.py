"""Greedy decoding."""

from __future__ import annotations

import numpy as np

from maskd.masking.masks import causal_mask
from maskd.model.transformer import Model, forward
from maskd.types import CapacityError, SegmentLayout, Sequence


def generate(model: Model, prompt_ids: np.ndarray, max_new: int, end_token: int | None = None) -> np.ndarray:
    """Greedy argmax decoding under the causal mask.

    Stops after emitting ``end_token`` (which is included) or after
    ``max_new`` tokens. Ties in argmax go to the lowest token id.

    Raises:
        CapacityError: If prompt plus max_new exceeds max_seq_len
    """
    prompt_ids = np.asarray(prompt_ids, dtype=np.int64)
    if len(prompt_ids) + max_new > model.config.max_seq_len:
        raise CapacityError(
            f"prompt of {len(prompt_ids)} tokens + max_new={max_new} exceeds max_seq_len={model.config.max_seq_len}"
        )
    tokens = list(prompt_ids)
    out: list[int] = []
    for _ in range(max_new):
        seq = Sequence(np.array(tokens), SegmentLayout.from_lengths(0, len(tokens), 0))
        logits = forward(model, seq, causal_mask(len(tokens))).logits
        nxt = int(np.argmax(logits.data[-1]))
        out.append(nxt)
        tokens.append(nxt)
        if end_token is not None and nxt == end_token:
            break
    return np.array(out, dtype=np.int64)
