"""Teacher pipeline: supervised training on gold traces, then the distill set.

The teacher learns next-token prediction on response tokens only. The
distill set keeps the teacher's own greedy traces for prompts it answers
correctly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import logfire
import numpy as np
from tqdm import tqdm

from maskd.corpus.records import CorpusRecord, answer_slot, layout_of
from maskd.corpus.vocab import BEGIN_THINK, END
from maskd.distill.config import TeacherConfig, TraceSource
from maskd.masking.masks import causal_mask
from maskd.model.config import ModelConfig
from maskd.model.generate import generate
from maskd.model.transformer import Model, build_model, forward
from maskd.tensor import ops
from maskd.tensor.optim import AdamState, adam_step, zero_grad
from maskd.tensor.rng import rng_stream
from maskd.tensor.tensor import ComputationTape, Tensor, backward
from maskd.types import DataError, EmptyDistillSet, Sequence

logger = logging.getLogger(__name__)

# Stream tag for the teacher's epoch shuffles
TEACHER_SHUFFLE_STREAM = 2


@dataclass
class TeacherRun:
    model: Model
    interval_losses: list[float] = field(default_factory=list)
    steps: int = 0


def response_cross_entropy(model: Model, seq: Sequence) -> Tensor:
    """Next-token loss on response tokens: rows [start-1, end-1) predict tokens[start:end]."""
    resp = seq.layout.response
    if resp.start < 1:
        raise DataError("teacher training needs at least one prompt token before the response")
    out = forward(model, seq, causal_mask(len(seq)), record_grad=True)
    logits = ops.take_rows(out.logits, slice(resp.start - 1, resp.end - 1))
    return ops.cross_entropy_rows(logits, seq.token_ids[resp.start : resp.end])


def train_teacher(
    config: ModelConfig,
    records: list[CorpusRecord],
    cfg: TeacherConfig,
    progress: bool = False,
) -> TeacherRun:
    """Train a fresh model on gold traces.

    interval_losses holds the mean batch loss over each block of
    ``cfg.diag_interval`` steps (a trailing partial block included).

    Raises:
        DataError: If there are no training records
    """
    if not records:
        raise DataError("teacher training corpus is empty")
    model = build_model(config)
    seqs = [layout_of(r, config.max_seq_len) for r in records]
    params = model.parameters()
    state = AdamState()
    run = TeacherRun(model=model)
    window: list[float] = []

    with logfire.span("train teacher", n_records=len(records), epochs=cfg.epochs):
        for epoch in range(cfg.epochs):
            order = rng_stream(cfg.seed, TEACHER_SHUFFLE_STREAM, epoch).permutation(len(seqs))
            batches = [order[i : i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]
            for batch in tqdm(batches, desc=f"teacher epoch {epoch}", disable=not progress):
                zero_grad(params)
                with ComputationTape() as tape:
                    losses = [response_cross_entropy(model, seqs[i]) for i in batch]
                    loss = losses[0] if len(losses) == 1 else ops.mean(ops.stack(losses))
                backward(loss, tape)
                adam_step(params, state, cfg.lr)
                window.append(loss.item())
                run.steps += 1
                if len(window) == cfg.diag_interval:
                    run.interval_losses.append(float(np.mean(window)))
                    window = []
            logger.info(f"Teacher epoch {epoch} done after {run.steps} steps")
    if window:
        run.interval_losses.append(float(np.mean(window)))
    return run


@dataclass
class DistillSet:
    records: list[CorpusRecord]
    total: int

    @property
    def kept(self) -> int:
        return len(self.records)

    @property
    def kept_ratio(self) -> float:
        return self.kept / self.total if self.total else 0.0


def teacher_trace(teacher: Model, record: CorpusRecord, max_new: int) -> list[int]:
    """Greedy response (starting at <think>) for the record's prompt."""
    prompt = record.prompt
    budget = min(max_new, teacher.config.max_seq_len - len(prompt))
    generated = generate(teacher, np.array(prompt), budget, end_token=END)
    return [BEGIN_THINK, *(int(t) for t in generated)]


def build_distill_set(
    teacher: Model,
    prompts: list[CorpusRecord],
    max_new: int,
    progress: bool = False,
    source: TraceSource = TraceSource.TEACHER,
) -> DistillSet:
    """Greedy-decode every prompt and keep the traces whose answer matches gold.

    ``teacher`` is whichever model generates the traces; ``source`` labels it
    in logs and errors (a student checkpoint for on-policy distill sets).

    Raises:
        DataError: If there are no prompts
        EmptyDistillSet: If no trace is correct
    """
    if not prompts:
        raise DataError("no prompts to build a distill set from")
    kept = []
    with logfire.span("build distill set", n_prompts=len(prompts), source=source.value):
        for record in tqdm(prompts, desc="distill set", disable=not progress):
            response = teacher_trace(teacher, record, max_new)
            if answer_slot(response) == record.answer:
                kept.append(record.model_copy(update={"response": response}))
    result = DistillSet(records=kept, total=len(prompts))
    if not kept:
        raise EmptyDistillSet(total=len(prompts), accuracy=0.0, source=source.value)
    logger.info(f"Distill set keeps {result.kept}/{result.total} {source.value} traces ({result.kept_ratio:.3f})")
    return result
