"""Token-wise divergence along the response, in percentage buckets."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from maskd.analysis.attention import as_sequence
from maskd.budget.divergence import tokenwise_reverse_kl
from maskd.corpus.records import CorpusRecord
from maskd.masking.masks import causal_mask
from maskd.model.transformer import Model, forward
from maskd.types import DataError, Sequence

logger = logging.getLogger(__name__)

DEFAULT_INTERVALS = 8


@dataclass(frozen=True)
class IntervalKLProfile:
    """Mean r per bucket; a bucket no token landed in holds NaN with count 0."""

    means: np.ndarray
    counts: np.ndarray

    def quartile_means(self) -> tuple[float, float]:
        """Mean over the first and the last quarter of the buckets."""
        q = max(1, len(self.means) // 4)
        return float(np.nanmean(self.means[:q])), float(np.nanmean(self.means[-q:]))


def bucket_index(n: int, length: int, k: int) -> int:
    """Bucket of 0-based token n in a length-token trace."""
    return n * k // length


def bucket_means(traces: list[np.ndarray], k: int) -> IntervalKLProfile:
    """Pool per-token values of every trace into k equal percentage buckets."""
    sums = np.zeros(k)
    counts = np.zeros(k, dtype=np.int64)
    for r in traces:
        for n, value in enumerate(r):
            b = bucket_index(n, len(r), k)
            sums[b] += value
            counts[b] += 1
    means = np.full(k, np.nan)
    np.divide(sums, counts, out=means, where=counts > 0)
    return IntervalKLProfile(means=means, counts=counts)


def interval_kl_decay(
    teacher: Model,
    student: Model,
    traces: list[Sequence] | list[CorpusRecord],
    k_intervals: int = DEFAULT_INTERVALS,
    tau: float = 1.0,
) -> IntervalKLProfile:
    """KL(student || teacher) per response token under causal masks, bucketed by relative position.

    Raises:
        DataError: If there are no traces or k_intervals < 1
    """
    if not traces or k_intervals < 1:
        raise DataError("interval_kl_decay needs traces and k_intervals >= 1")
    per_trace = []
    for trace in traces:
        seq = as_sequence(trace, student)
        rows = slice(seq.layout.response.start, seq.layout.response.end)
        mask = causal_mask(len(seq))
        s = forward(student, seq, mask).logits.data[rows]
        t = forward(teacher, seq, mask).logits.data[rows]
        per_trace.append(tokenwise_reverse_kl(s, t, tau).r)
    profile = bucket_means(per_trace, k_intervals)
    logger.debug(f"Interval KL over {len(per_trace)} traces: {np.round(profile.means, 4).tolist()}")
    return profile
