"""Masking: salient reasoning-prefix selection and attention-mask matrices.

Usage:
    from maskd.masking import build_salient_mask, select_for_sequence

    selection = select_for_sequence(a_resp, layout, rhos)
    mask = build_salient_mask(selection, layout)
"""

from maskd.masking.dump import write_mask_dump
from maskd.masking.masks import AttentionMaskMatrix, MaskKind, build_region_mask, build_salient_mask, causal_mask
from maskd.masking.selection import (
    SalientSelection,
    SelectionEntry,
    SelectionRule,
    Strategy,
    non_adaptive_set,
    normalize_prefix_row,
    select_for_sequence,
    select_salient_prefixes,
    select_variant_prefixes,
)

__all__ = [
    # Masks
    "AttentionMaskMatrix",
    "MaskKind",
    "causal_mask",
    "build_salient_mask",
    "build_region_mask",
    # Selection
    "SalientSelection",
    "SelectionEntry",
    "SelectionRule",
    "Strategy",
    "normalize_prefix_row",
    "select_salient_prefixes",
    "select_variant_prefixes",
    "non_adaptive_set",
    "select_for_sequence",
    # Dumps
    "write_mask_dump",
]
