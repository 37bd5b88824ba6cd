"""JSONL corpus files: one CorpusRecord per line after a header comment."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ValidationError
from tqdm import tqdm

from maskd.corpus.sample import CorpusParams, TaskSample, gen_sample
from maskd.corpus.vocab import BEGIN_ANSWER, BEGIN_THINK, DEFAULT_VOCAB, VocabSpec, sidecar_path
from maskd.tensor.rng import rng_stream
from maskd.types import CapacityError, DataError, InvariantViolation, SegmentLayout, Sequence

logger = logging.getLogger(__name__)

TRAIN_FRACTION = 0.9
HEADER_PREFIX = "#"

Split = Literal["train", "eval"]


class CorpusRecord(BaseModel):
    """One line of a corpus file."""

    visual: list[int]
    question: list[int]
    response: list[int]
    answer: int
    split: Split = "train"

    @classmethod
    def from_sample(cls, sample: TaskSample, split: Split) -> CorpusRecord:
        return cls(
            visual=list(sample.visual_tokens),
            question=list(sample.question_tokens),
            response=list(sample.gold_trace),
            answer=sample.answer_token,
            split=split,
        )

    @property
    def prompt(self) -> list[int]:
        """Generation prompt: visual + question + the think opener."""
        return [*self.visual, *self.question, BEGIN_THINK]


@dataclass(frozen=True)
class CorpusSummary:
    path: Path
    count: int
    n_train: int
    n_eval: int
    sha256: str

    def line(self) -> str:
        return f"{self.count} samples (train {self.n_train}, eval {self.n_eval}) sha256 {self.sha256} -> {self.path}"


def split_sizes(n: int, train_fraction: float = TRAIN_FRACTION) -> tuple[int, int]:
    n_train = int(round(n * train_fraction))
    return n_train, n - n_train


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def gen_corpus(
    n: int,
    seed: int,
    params: CorpusParams,
    path: Path,
    vocab: VocabSpec = DEFAULT_VOCAB,
    progress: bool = False,
) -> CorpusSummary:
    """Generate ``n`` samples into a JSONL file plus its vocabulary sidecar.

    Sample i is drawn from its own stream keyed by (seed, i), and the first
    round(0.9 n) samples form the train split.
    """
    if n < 0:
        raise DataError(f"sample count must be >= 0 (got {n})")
    n_train, n_eval = split_sizes(n)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as f:
        f.write(f"{HEADER_PREFIX} maskd-corpus v1 n={n} seed={seed} hops={params.hops} n_facts={params.n_facts}\n")
        for i in tqdm(range(n), desc="corpus", disable=not progress):
            sample = gen_sample(rng_stream(seed, i), params, vocab)
            record = CorpusRecord.from_sample(sample, "train" if i < n_train else "eval")
            f.write(record.model_dump_json() + "\n")
    vocab.write_sidecar(sidecar_path(path))
    summary = CorpusSummary(path=path, count=n, n_train=n_train, n_eval=n_eval, sha256=file_sha256(path))
    logger.info(f"Wrote corpus: {summary.line()}")
    return summary


def write_records(records: list[CorpusRecord], path: Path, header: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as f:
        f.write(f"{HEADER_PREFIX} {header}\n")
        for record in records:
            f.write(record.model_dump_json() + "\n")
    return path


def load_corpus(path: Path, split: Split | None = None) -> list[CorpusRecord]:
    """Read a corpus file, optionally keeping one split.

    Raises:
        DataError: If a line fails validation (the message names path and line)
    """
    records: list[CorpusRecord] = []
    with path.open() as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip() or line.startswith(HEADER_PREFIX):
                continue
            try:
                record = CorpusRecord.model_validate_json(line)
            except ValidationError as e:
                raise DataError(f"{path}:{lineno}: invalid corpus record: {e}") from e
            if split is None or record.split == split:
                records.append(record)
    return records


def layout_of(record: CorpusRecord | TaskSample, max_seq_len: int | None = None) -> Sequence:
    """Lay out visual, question and response tokens as one Sequence.

    Raises:
        InvariantViolation: If the question is empty
        CapacityError: If the sequence is longer than max_seq_len
    """
    if isinstance(record, TaskSample):
        visual, question, response = record.visual_tokens, record.question_tokens, record.gold_trace
        answer = record.answer_token
    else:
        visual, question, response, answer = record.visual, record.question, record.response, record.answer
    if not question:
        raise InvariantViolation("questions are never empty")
    layout = SegmentLayout.from_lengths(len(visual), len(question), len(response))
    if max_seq_len is not None and layout.total > max_seq_len:
        raise CapacityError(f"sequence of {layout.total} tokens exceeds max_seq_len={max_seq_len}")
    return Sequence(token_ids=[*visual, *question, *response], layout=layout, answer=answer)


def answer_slot(response: list[int] | tuple[int, ...]) -> int | None:
    """The token right after <answer>, or None if the trace never opens one."""
    for i, token in enumerate(response[:-1]):
        if token == BEGIN_ANSWER:
            return int(response[i + 1])
    return None
