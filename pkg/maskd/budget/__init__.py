"""Budget: token-wise divergence and per-token masking budgets."""

from maskd.budget.divergence import DivergenceTrace, tempered_probs, tokenwise_reverse_kl
from maskd.budget.dump import write_schedule_dump
from maskd.budget.schedule import (
    DEFAULT_EPSILON,
    DEFAULT_RHO_MAX,
    DEFAULT_RHO_MIN,
    BudgetSchedule,
    self_paced_thresholds,
    static_threshold,
)
from maskd.budget.thresholds import (
    AttentionThresholdRule,
    MaskingRatioRule,
    ThresholdMode,
    ThresholdRule,
    alt_threshold_modes,
)

__all__ = [
    "DivergenceTrace",
    "tempered_probs",
    "tokenwise_reverse_kl",
    "BudgetSchedule",
    "DEFAULT_RHO_MIN",
    "DEFAULT_RHO_MAX",
    "DEFAULT_EPSILON",
    "self_paced_thresholds",
    "static_threshold",
    "ThresholdMode",
    "ThresholdRule",
    "AttentionThresholdRule",
    "MaskingRatioRule",
    "alt_threshold_modes",
    "write_schedule_dump",
]
