"""Attention diagnostics of a model on its causal forward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from maskd.corpus.records import CorpusRecord, layout_of
from maskd.masking.masks import causal_mask
from maskd.masking.selection import normalize_prefix_row
from maskd.model.transformer import Model, extract_response_attention, forward
from maskd.types import DataError, NoResults, Sequence, Success


def as_sequence(sample: Sequence | CorpusRecord, model: Model) -> Sequence:
    return sample if isinstance(sample, Sequence) else layout_of(sample, model.config.max_seq_len)


def causal_attention(model: Model, seq: Sequence) -> np.ndarray:
    """Layer/head-averaged attention under the causal mask."""
    return forward(model, seq, causal_mask(len(seq)), capture_attention=True).attention_avg.data


@dataclass(frozen=True)
class AttentionCurve:
    """Mean visual fraction per 1-based response position and how many samples reached it."""

    fractions: np.ndarray
    counts: np.ndarray

    @property
    def mean(self) -> float:
        """Token-weighted mean visual fraction over all response positions."""
        total = self.counts.sum()
        return float((self.fractions * self.counts).sum() / total) if total else 0.0


def visual_fractions(attention: np.ndarray, seq: Sequence) -> np.ndarray:
    """Per response row: visual-column mass over total row mass."""
    layout = seq.layout
    rows = attention[layout.response.start : layout.response.end]
    totals = rows.sum(axis=1)
    visual = rows[:, layout.visual.start : layout.visual.end].sum(axis=1)
    return np.clip(np.divide(visual, totals, out=np.zeros_like(visual), where=totals > 0), 0.0, 1.0)


def visual_attention_curve(model: Model, samples: list[Sequence] | list[CorpusRecord]) -> AttentionCurve:
    """Average visual fraction at each response position across samples.

    Raises:
        DataError: If there are no samples
    """
    if not samples:
        raise DataError("visual_attention_curve needs at least one sample")
    per_sample = []
    for sample in samples:
        seq = as_sequence(sample, model)
        per_sample.append(visual_fractions(causal_attention(model, seq), seq))
    length = max(len(f) for f in per_sample)
    sums = np.zeros(length)
    counts = np.zeros(length, dtype=np.int64)
    for f in per_sample:
        sums[: len(f)] += f
        counts[: len(f)] += 1
    fractions = np.divide(sums, counts, out=np.zeros(length), where=counts > 0)
    return AttentionCurve(fractions=fractions, counts=counts)


def mean_visual_attention_map(model: Model, sample: Sequence | CorpusRecord) -> np.ndarray:
    """Attention each visual position receives, averaged over all response rows."""
    seq = as_sequence(sample, model)
    layout = seq.layout
    attention = causal_attention(model, seq)
    if len(layout.response) == 0:
        return np.zeros(len(layout.visual))
    block = attention[layout.response.start : layout.response.end, layout.visual.start : layout.visual.end]
    return block.mean(axis=0)


@dataclass(frozen=True)
class SalientMassCurve:
    """Mean normalized prefix mass held by the k most-attended prefixes, k = 1..max_k."""

    mass: np.ndarray
    counts: np.ndarray


def salient_mass_curve(model: Model, samples: list[Sequence] | list[CorpusRecord], max_k: int) -> SalientMassCurve:
    """How concentrated prefix attention is.

    Only rows with at least k prefixes contribute to entry k.

    Raises:
        DataError: If there are no samples or max_k < 1
    """
    if not samples or max_k < 1:
        raise DataError("salient_mass_curve needs samples and max_k >= 1")
    sums = np.zeros(max_k)
    counts = np.zeros(max_k, dtype=np.int64)
    for sample in samples:
        seq = as_sequence(sample, model)
        a_resp = extract_response_attention(
            forward(model, seq, causal_mask(len(seq)), capture_attention=True).attention_avg, seq.layout
        )
        for n in range(2, len(seq.layout.response) + 1):
            match normalize_prefix_row(a_resp, n):
                case Success(weights):
                    top = np.cumsum(np.sort(weights)[::-1])[:max_k]
                    sums[: len(top)] += top
                    counts[: len(top)] += 1
                case NoResults():
                    continue
    return SalientMassCurve(mass=np.divide(sums, counts, out=np.zeros(max_k), where=counts > 0), counts=counts)
