"""Additive attention-mask matrices.

All kinds are supersets of the causal mask: entries above the diagonal are
-inf, the diagonal is always 0. Salient and region masks add extra -inf
entries on response rows only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from maskd.masking.selection import SalientSelection
from maskd.types import InvariantViolation, SegmentLayout, UnknownOption

NEG_INF = -np.inf


class MaskKind(StrEnum):
    CAUSAL = "causal"
    SALIENT = "salient"
    REGION_VISUAL = "region_visual"
    REGION_QUESTION = "region_question"


@dataclass(frozen=True)
class AttentionMaskMatrix:
    """N x N additive mask over {0, -inf}."""

    entries: np.ndarray
    kind: MaskKind

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def masked(self) -> np.ndarray:
        """Boolean matrix of masked entries."""
        return np.isneginf(self.entries)

    def extra_masked(self) -> np.ndarray:
        """Masked entries beyond the causal pattern."""
        return self.masked() & ~causal_mask(self.size).masked()


def causal_mask(n: int) -> AttentionMaskMatrix:
    return AttentionMaskMatrix(entries=np.triu(np.full((n, n), NEG_INF), k=1), kind=MaskKind.CAUSAL)


def build_salient_mask(
    selection: SalientSelection,
    layout: SegmentLayout,
    allow_immediate_prev: bool = False,
) -> AttentionMaskMatrix:
    """Causal mask plus -inf at every (response row, selected prefix) entry.

    Visual and question columns are never touched, and non-response rows
    keep the plain causal pattern.

    Raises:
        InvariantViolation: If a selection names a future, non-response or
            (unless allowed) immediately preceding position
    """
    entries = causal_mask(layout.total).entries
    resp = layout.response
    for entry in selection.entries:
        row = entry.position
        if row not in resp:
            raise InvariantViolation(f"selection row {row} is outside the response span {resp}")
        for col in entry.masked:
            if col >= row:
                raise InvariantViolation(f"row {row} selects future position {col}")
            if col not in resp:
                raise InvariantViolation(f"row {row} selects non-response position {col}")
            if col == row - 1 and not allow_immediate_prev:
                raise InvariantViolation(f"row {row} selects its immediate predecessor {col}")
            entries[row, col] = NEG_INF
    return AttentionMaskMatrix(entries=entries, kind=MaskKind.SALIENT)


def build_region_mask(region: str, layout: SegmentLayout) -> AttentionMaskMatrix:
    """Causal mask plus -inf across a whole visual or question span for every response row."""
    match region:
        case "visual":
            span, kind = layout.visual, MaskKind.REGION_VISUAL
        case "question":
            span, kind = layout.question, MaskKind.REGION_QUESTION
        case _:
            raise UnknownOption("mask region", region, ["visual", "question"])
    entries = causal_mask(layout.total).entries
    resp = layout.response
    entries[resp.start : resp.end, span.start : span.end] = NEG_INF
    return AttentionMaskMatrix(entries=entries, kind=kind)
