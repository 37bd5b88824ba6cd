"""Per-token masking budgets: the self-paced map and the static baseline.

A token the auxiliary student already matches (small r) is easy and gets a
larger budget; a hard token gets a smaller one. Log-scaled scores are
centered on their mean within the trace, so only relative difficulty
matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from maskd.budget.divergence import DivergenceTrace
from maskd.types import ConfigError, InvariantViolation, NumericError

DEFAULT_RHO_MIN = 0.3
DEFAULT_RHO_MAX = 0.5
DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class BudgetSchedule:
    """rho_n per response position, inside [rho_min, rho_max]."""

    rho: np.ndarray
    rho_min: float
    rho_max: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=np.float64)
        object.__setattr__(self, "rho", rho)
        if len(rho) and (rho.min() < self.rho_min or rho.max() > self.rho_max):
            raise InvariantViolation(f"budgets leave [{self.rho_min}, {self.rho_max}]: [{rho.min()}, {rho.max()}]")

    def __len__(self) -> int:
        return len(self.rho)


def _check_bounds(rho_min: float, rho_max: float) -> None:
    if not 0.0 <= rho_min <= rho_max <= 1.0:
        raise ConfigError(f"0 <= rho_min <= rho_max <= 1 required (got rho_min={rho_min}, rho_max={rho_max})")


def self_paced_thresholds(
    trace: DivergenceTrace,
    rho_min: float = DEFAULT_RHO_MIN,
    rho_max: float = DEFAULT_RHO_MAX,
    epsilon: float = DEFAULT_EPSILON,
) -> BudgetSchedule:
    """rho_n = rho_min + (rho_max - rho_min) * sigmoid(s_n - mean(s)), s_n = -log(r_n + epsilon).

    A uniform trace (including N=1) maps every position to the exact midpoint.

    Raises:
        ConfigError: If the bounds or epsilon are invalid
        NumericError: If the trace holds non-finite entries
    """
    _check_bounds(rho_min, rho_max)
    if not epsilon > 0:
        raise ConfigError(f"epsilon > 0 required (got {epsilon})")
    r = np.asarray(trace.r, dtype=np.float64)
    if not np.isfinite(r).all():
        raise NumericError("self_paced_thresholds needs a finite divergence trace")
    if len(r) == 0:
        return BudgetSchedule(np.zeros(0), rho_min, rho_max, epsilon)

    scores = -np.log(r + epsilon)
    if np.ptp(scores) == 0.0:
        rho = np.full(len(r), (rho_min + rho_max) / 2)
    else:
        rho = rho_min + (rho_max - rho_min) * expit(scores - scores.mean())
    return BudgetSchedule(np.clip(rho, rho_min, rho_max), rho_min, rho_max, epsilon)


def static_threshold(n: int, rho: float) -> BudgetSchedule:
    """Constant budget ``rho`` for ``n`` positions.

    Raises:
        ConfigError: If rho is outside [0, 1]
    """
    if not 0.0 <= rho <= 1.0:
        raise ConfigError(f"static rho must lie in [0, 1] (got {rho})")
    return BudgetSchedule(np.full(max(n, 0), float(rho)), rho, rho)
