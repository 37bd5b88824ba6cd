"""Salient reasoning-prefix selection (top-rho masking and its ablation variants).

For response row n the candidates are the earlier response positions. Their
attention is normalized over all n-1 prefixes, then prefixes are collected
greedily in descending attention (ties: lower position first) until the
collected mass reaches rho. Exclusions (the immediate predecessor) are
skipped at collection time only, so a rho the excluded token would have
covered saturates to the whole eligible set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Protocol

import numpy as np

from maskd.tensor.tensor import Tensor
from maskd.types import InvariantViolation, NoResults, SegmentLayout, Success, UnknownOption

logger = logging.getLogger(__name__)


class Strategy(StrEnum):
    HIGH_ATTENTION = "high_attention"
    LOW_ATTENTION = "low_attention"
    MIDDLE_ATTENTION = "middle_attention"
    RANDOM = "random"
    NON_ADAPTIVE = "non_adaptive"


@dataclass(frozen=True)
class SelectionEntry:
    """Masked prefixes for one response row.

    position is the row's absolute position; masked holds absolute prefix
    positions in collection order.
    """

    position: int
    rho: float
    achieved_mass: float
    masked: tuple[int, ...] = ()

    @property
    def distances(self) -> list[int]:
        return [self.position - j for j in self.masked]


@dataclass
class SalientSelection:
    """Per-row selections for one sequence."""

    entries: list[SelectionEntry] = field(default_factory=list)

    @property
    def sizes(self) -> list[int]:
        return [len(e.masked) for e in self.entries]

    @property
    def distances(self) -> list[int]:
        return [d for e in self.entries for d in e.distances]

    @property
    def rhos(self) -> list[float]:
        return [e.rho for e in self.entries]


class SelectionRule(Protocol):
    """A non-cumulative selection rule (see maskd.budget.thresholds)."""

    def select(self, weights: np.ndarray, positions: np.ndarray, eligible: np.ndarray) -> list[int]: ...


# ─────────────────────────────────────────────────────────────────────────────
# Single-row primitives
# ─────────────────────────────────────────────────────────────────────────────


def normalize_prefix_row(a_resp: Tensor | np.ndarray, n: int) -> Success[np.ndarray] | NoResults:
    """Normalize row n's attention over its n-1 response prefixes.

    Args:
        a_resp: Response-to-response attention (N x N)
        n: 1-based response index, n >= 2

    Returns:
        Success with weights summing to 1, or NoResults when every prefix
        entry is zero (the caller then selects nothing)
    """
    data = a_resp.data if isinstance(a_resp, Tensor) else np.asarray(a_resp, dtype=np.float64)
    if n < 2 or n > data.shape[0]:
        raise InvariantViolation(f"normalize_prefix_row needs 2 <= n <= {data.shape[0]}, got {n}")
    row = np.asarray(data[n - 1, : n - 1], dtype=np.float64)
    total = row.sum()
    if not total > 0.0:
        return NoResults()
    return Success(row / total)


def _positions(weights: np.ndarray, positions: np.ndarray | None) -> np.ndarray:
    return np.arange(len(weights)) if positions is None else np.asarray(positions, dtype=np.int64)


def _collect(order: np.ndarray, weights: np.ndarray, eligible: np.ndarray, rho: float) -> tuple[list[int], float]:
    """Walk ``order`` over eligible indices until mass >= rho (or the set runs out)."""
    picked: list[int] = []
    mass = 0.0
    if rho <= 0.0:
        return picked, mass
    for idx in order:
        if not eligible[idx]:
            continue
        picked.append(int(idx))
        mass += float(weights[idx])
        if mass >= rho:
            break
    return picked, mass


def _entry(row: int, rho: float, picked: list[int], mass: float, positions: np.ndarray) -> SelectionEntry:
    masked = tuple(int(positions[i]) for i in picked)
    return SelectionEntry(position=row, rho=float(rho), achieved_mass=mass, masked=masked)


def _eligible(positions: np.ndarray, exclude: set[int] | frozenset[int]) -> np.ndarray:
    return np.array([int(p) not in exclude for p in positions], dtype=bool)


def descending_order(weights: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Indices by descending weight, ties broken by lower position."""
    return np.lexsort((positions, -weights))


def select_salient_prefixes(
    weights: np.ndarray,
    rho: float,
    exclude: set[int] | frozenset[int] = frozenset(),
    positions: np.ndarray | None = None,
    row: int | None = None,
) -> SelectionEntry:
    """Top-rho selection: the shortest descending-attention run reaching rho.

    Args:
        weights: Normalized prefix weights
        rho: Cumulative mass threshold in [0, 1]
        exclude: Positions never collected (always holds n-1 in training)
        positions: Absolute position of each weight (defaults to 0..k-1)
        row: Absolute position of the row (defaults to len(weights))
    """
    if not 0.0 <= rho <= 1.0:
        raise InvariantViolation(f"rho must lie in [0, 1], got {rho}")
    weights = np.asarray(weights, dtype=np.float64)
    pos = _positions(weights, positions)
    picked, mass = _collect(descending_order(weights, pos), weights, _eligible(pos, exclude), rho)
    return _entry(len(weights) if row is None else row, rho, picked, mass, pos)


def _middle_out(order: np.ndarray) -> np.ndarray:
    """Reorder ranks starting at the median and alternating below/above it."""
    k = len(order)
    if k == 0:
        return order
    mid = (k - 1) // 2
    out = [order[mid]]
    for step in range(1, k):
        for idx in (mid + step, mid - step):
            if 0 <= idx < k:
                out.append(order[idx])
    return np.array(out, dtype=np.int64)


def select_variant_prefixes(
    weights: np.ndarray,
    rho: float,
    strategy: Strategy | str,
    rng: np.random.Generator | None = None,
    exclude: set[int] | frozenset[int] = frozenset(),
    positions: np.ndarray | None = None,
    row: int | None = None,
    global_set: set[int] | frozenset[int] | None = None,
) -> SelectionEntry:
    """Ablation variants of which prefixes to collect.

    high_attention delegates to select_salient_prefixes; low_attention walks
    ascending attention; middle_attention walks outward from the median rank
    of the eligible prefixes; random walks a shuffled order; non_adaptive
    masks ``global_set`` intersected with the row's eligible prefixes.

    Raises:
        UnknownOption: If the strategy is not one of Strategy
    """
    try:
        strategy = Strategy(strategy)
    except ValueError:
        raise UnknownOption("selection strategy", strategy, [s.value for s in Strategy]) from None

    weights = np.asarray(weights, dtype=np.float64)
    pos = _positions(weights, positions)
    eligible = _eligible(pos, exclude)
    row = len(weights) if row is None else row

    match strategy:
        case Strategy.HIGH_ATTENTION:
            return select_salient_prefixes(weights, rho, exclude, pos, row)
        case Strategy.LOW_ATTENTION:
            order = np.lexsort((pos, weights))
        case Strategy.MIDDLE_ATTENTION:
            ranked = descending_order(weights, pos)
            order = _middle_out(ranked[eligible[ranked]])
        case Strategy.RANDOM:
            if rng is None:
                raise InvariantViolation("random selection needs a generator")
            order = rng.permutation(len(weights))
        case Strategy.NON_ADAPTIVE:
            chosen = global_set or frozenset()
            picked = [i for i in range(len(weights)) if eligible[i] and int(pos[i]) in chosen]
            return _entry(row, rho, picked, float(sum(weights[i] for i in picked)), pos)

    picked, mass = _collect(order, weights, eligible, rho)
    return _entry(row, rho, picked, mass, pos)


# ─────────────────────────────────────────────────────────────────────────────
# Whole-sequence driver
# ─────────────────────────────────────────────────────────────────────────────


def non_adaptive_set(a_resp: np.ndarray, layout: SegmentLayout, rho: float) -> frozenset[int]:
    """One global prefix set from the mean normalized attention each position receives.

    Column j's score is the mean of its normalized weight over every later
    row that has prefixes; the scores are renormalized and collected top-rho.
    """
    size = len(layout.response)
    totals = np.zeros(size)
    counts = np.zeros(size)
    for n in range(2, size + 1):
        match normalize_prefix_row(a_resp, n):
            case Success(w):
                totals[: n - 1] += w
                counts[: n - 1] += 1
            case NoResults():
                pass
    scores = np.divide(totals, counts, out=np.zeros(size), where=counts > 0)
    if scores.sum() <= 0:
        return frozenset()
    positions = np.arange(layout.response.start, layout.response.end)
    entry = select_salient_prefixes(scores / scores.sum(), rho, positions=positions)
    return frozenset(entry.masked)


def select_for_sequence(
    a_resp: Tensor | np.ndarray,
    layout: SegmentLayout,
    rhos: np.ndarray,
    strategy: Strategy | str = Strategy.HIGH_ATTENTION,
    rule: SelectionRule | None = None,
    exclude_immediate_prev: bool = True,
    rng: np.random.Generator | None = None,
) -> SalientSelection:
    """Select masked prefixes for every response row of one sequence.

    Rows 1 (no prefixes) and 2 (only the excluded predecessor) come out
    empty. When ``rule`` is given it replaces cumulative-ratio collection.
    """
    data = a_resp.data if isinstance(a_resp, Tensor) else np.asarray(a_resp, dtype=np.float64)
    size = len(layout.response)
    if data.shape != (size, size) or len(rhos) != size:
        raise InvariantViolation(f"attention {data.shape} / budgets {len(rhos)} do not match response length {size}")

    strategy = Strategy(strategy)
    global_set = None
    if rule is None and strategy is Strategy.NON_ADAPTIVE:
        global_set = non_adaptive_set(data, layout, float(np.mean(rhos)))

    out = SalientSelection()
    for n in range(1, size + 1):
        row = layout.response_position(n)
        rho = float(rhos[n - 1])
        if n < 2:
            out.entries.append(SelectionEntry(position=row, rho=rho, achieved_mass=0.0))
            continue
        match normalize_prefix_row(data, n):
            case NoResults():
                out.entries.append(SelectionEntry(position=row, rho=rho, achieved_mass=0.0))
                continue
            case Success(weights):
                pass
        positions = np.arange(layout.response.start, row)
        exclude = frozenset({row - 1}) if exclude_immediate_prev else frozenset()
        if rule is not None:
            eligible = _eligible(positions, exclude)
            picked = rule.select(weights, positions, eligible)
            mass = float(sum(weights[i] for i in picked))
            out.entries.append(_entry(row, rho, picked, mass, positions))
        else:
            out.entries.append(
                select_variant_prefixes(weights, rho, strategy, rng, exclude, positions, row, global_set)
            )
    logger.debug(f"Selected {sum(out.sizes)} masked prefixes over {size} response rows")
    return out
