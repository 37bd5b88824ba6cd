"""Greedy-decoding answer accuracy."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from maskd.corpus.records import CorpusRecord, answer_slot
from maskd.distill.teacher import teacher_trace
from maskd.model.transformer import Model
from maskd.types import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccuracyResult:
    split: str
    n: int
    correct: int

    @property
    def fraction(self) -> float:
        return self.correct / self.n if self.n else 0.0


def answer_accuracy(
    model: Model,
    samples: list[CorpusRecord],
    max_new: int = 64,
    split: str = "eval",
    workers: int = 1,
) -> AccuracyResult:
    """Fraction of samples whose decoded answer slot equals gold.

    Decoding reads shared weights only, so samples may fan out across
    ``workers`` threads.

    Raises:
        DataError: If there are no samples
    """
    if not samples:
        raise DataError(f"no {split} samples to evaluate")

    def correct(record: CorpusRecord) -> bool:
        return answer_slot(teacher_trace(model, record, max_new)) == record.answer

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(correct, samples))
    else:
        hits = [correct(r) for r in samples]
    result = AccuracyResult(split=split, n=len(samples), correct=sum(hits))
    logger.info(f"Accuracy on {split}: {result.correct}/{result.n} = {result.fraction:.3f}")
    return result
