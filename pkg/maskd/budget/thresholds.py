"""Non-cumulative selection rules used in place of the top-rho collection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from maskd.budget.divergence import DivergenceTrace
from maskd.masking.selection import descending_order
from maskd.types import ConfigError, UnknownOption


class ThresholdMode(StrEnum):
    SELF_PACED = "self_paced"
    STATIC = "static"
    ATTENTION_THRESHOLD = "attention_threshold"
    MASKING_RATIO = "masking_ratio"


@dataclass(frozen=True)
class AttentionThresholdRule:
    """Mask every eligible prefix whose normalized attention exceeds ``cutoff``."""

    cutoff: float

    def select(self, weights: np.ndarray, positions: np.ndarray, eligible: np.ndarray) -> list[int]:
        order = descending_order(weights, positions)
        return [int(i) for i in order if eligible[i] and weights[i] > self.cutoff]


@dataclass(frozen=True)
class MaskingRatioRule:
    """Mask the top floor(ratio * |eligible|) eligible prefixes by attention."""

    ratio: float

    def select(self, weights: np.ndarray, positions: np.ndarray, eligible: np.ndarray) -> list[int]:
        count = math.floor(self.ratio * int(eligible.sum()))
        order = [int(i) for i in descending_order(weights, positions) if eligible[i]]
        return order[:count]


ThresholdRule = AttentionThresholdRule | MaskingRatioRule


def alt_threshold_modes(trace: DivergenceTrace | None, mode: ThresholdMode | str, param: float) -> ThresholdRule:
    """Build the selection rule for an ablation threshold mode.

    The rules ignore the divergence trace; it is accepted so every
    threshold mode is driven from the same auxiliary outputs.

    Raises:
        UnknownOption: If mode is not attention_threshold or masking_ratio
        ConfigError: If param is outside [0, 1]
    """
    allowed = [ThresholdMode.ATTENTION_THRESHOLD.value, ThresholdMode.MASKING_RATIO.value]
    if mode not in allowed:
        raise UnknownOption("threshold mode", mode, allowed)
    if not 0.0 <= param <= 1.0:
        raise ConfigError(f"{mode} parameter must lie in [0, 1] (got {param})")
    if mode == ThresholdMode.ATTENTION_THRESHOLD:
        return AttentionThresholdRule(cutoff=float(param))
    return MaskingRatioRule(ratio=float(param))
