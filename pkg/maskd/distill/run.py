"""Full distillation runs with metrics, diagnostics and checkpoints on disk.

Run directory layout:

    metrics.csv            one row per diagnostic step
    diagnostics.jsonl      one StepDiagnostics per diagnostic step
    last_good.ckpt.json    student after the last finished epoch
    model.ckpt.json        final student
    masks/, schedules/     first sequence of each diagnostic step (dump_masks)
    abort.json             only when a step produced non-finite values
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import logfire
from tqdm import tqdm

from maskd.budget.dump import write_schedule_dump
from maskd.corpus.records import CorpusRecord, layout_of
from maskd.distill.config import DistillConfig
from maskd.distill.diagnostics import METRICS_COLUMNS, StepDiagnostics
from maskd.distill.step import DistillTarget, distill_step_with_targets, self_distill_step_with_targets
from maskd.masking.dump import write_mask_dump
from maskd.model.checkpoint import load_checkpoint, save_checkpoint
from maskd.model.transformer import Model, build_model
from maskd.tensor.optim import AdamState
from maskd.tensor.rng import rng_stream
from maskd.types import DataError, TrainingAborted

logger = logging.getLogger(__name__)

# Stream tag for distillation epoch shuffles
SHUFFLE_STREAM = 3
# Seed offset of the frozen auxiliary model when weights are not shared
AUX_SEED_OFFSET = 1000

METRICS_FILE = "metrics.csv"
DIAGNOSTICS_FILE = "diagnostics.jsonl"
LAST_GOOD_FILE = "last_good.ckpt.json"
FINAL_FILE = "model.ckpt.json"
ABORT_FILE = "abort.json"


@dataclass
class RunResult:
    model: Model
    checkpoint: Path
    metrics: Path
    diagnostics: Path
    steps: int
    rows: int


def _load(model: Model | Path) -> Model:
    return model if isinstance(model, Model) else load_checkpoint(model)


def frozen_aux_model(student: Model) -> Model:
    """A separately initialized copy of the student's architecture, frozen."""
    config = student.config.model_copy(update={"seed": student.config.seed + AUX_SEED_OFFSET})
    return build_model(config).freeze()


def diagnostic_steps(n_sequences: int, cfg: DistillConfig) -> int:
    """Number of metrics rows a run writes."""
    steps = cfg.epochs * -(-n_sequences // cfg.batch_size)
    return -(-steps // cfg.diag_interval)


def _write_dumps(run_dir: Path, step: int, target: DistillTarget) -> None:
    name = f"step_{step:06d}.csv"
    write_mask_dump(target.selection, run_dir / "masks" / name)
    write_schedule_dump(target.trace, target.schedule, target.seq.layout.response.start, run_dir / "schedules" / name)


def run_training(
    cfg: DistillConfig,
    teacher: Model | Path | None,
    student: Model | Path,
    distill_set: list[CorpusRecord],
    run_dir: Path,
    *,
    aux: Model | None = None,
    progress: bool = False,
) -> RunResult:
    """Distill for cfg.epochs over ``distill_set``; ``teacher=None`` self-distills the student.

    Raises:
        DataError: If the distill set is empty
        TrainingAborted: If a step produced non-finite values; the student
            of the last finished epoch stays in last_good.ckpt.json
    """
    if not distill_set:
        raise DataError("distill set is empty")
    student = _load(student)
    teacher = _load(teacher) if teacher is not None else None
    if teacher is not None:
        teacher.freeze()
    if teacher is not None and not cfg.aux_weight_shared and aux is None:
        aux = frozen_aux_model(student)

    seqs = [layout_of(r, student.config.max_seq_len) for r in distill_set]
    run_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = run_dir / METRICS_FILE
    diagnostics_path = run_dir / DIAGNOSTICS_FILE
    last_good = save_checkpoint(student, run_dir / LAST_GOOD_FILE)

    state = AdamState()
    rows = 0
    last: StepDiagnostics | None = None
    mode = "self-distill" if teacher is None else "distill"

    with (
        logfire.span(f"{mode} run", run_dir=str(run_dir), mask_kind=cfg.mask_kind.value, seed=cfg.seed),
        metrics_path.open("w", newline="") as metrics_file,
        diagnostics_path.open("w") as diagnostics_file,
    ):
        writer = csv.writer(metrics_file, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        try:
            for epoch in range(cfg.epochs):
                order = rng_stream(cfg.seed, SHUFFLE_STREAM, epoch).permutation(len(seqs))
                batches = [order[i : i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]
                for batch in tqdm(batches, desc=f"{mode} epoch {epoch}", disable=not progress):
                    batch_seqs = [seqs[i] for i in batch]
                    if teacher is None:
                        diag, targets = self_distill_step_with_targets(student, batch_seqs, cfg, state)
                    else:
                        diag, targets = distill_step_with_targets(teacher, student, batch_seqs, cfg, state, aux=aux)
                    last = diag
                    if diag.step % cfg.diag_interval == 0:
                        writer.writerow(diag.metrics_row())
                        diagnostics_file.write(diag.model_dump_json() + "\n")
                        rows += 1
                        if cfg.dump_masks:
                            _write_dumps(run_dir, diag.step, targets[0])
                save_checkpoint(student, run_dir / LAST_GOOD_FILE)
                logger.info(f"{mode} epoch {epoch} done at step {state.step}")
        except TrainingAborted as e:
            dump = run_dir / ABORT_FILE
            dump.write_text(
                json.dumps(
                    {"error": str(e), "step": state.step, "last": last.model_dump() if last else None}, indent=2
                )
                + "\n"
            )
            logfire.exception(f"{mode} run aborted", run_dir=str(run_dir))
            message = f"{e} (diagnostics in {dump}, last good checkpoint {last_good})"
            raise TrainingAborted(message, str(dump), str(last_good)) from e

    final = save_checkpoint(student, run_dir / FINAL_FILE)
    logger.info(f"{mode} run finished: {state.step} steps, {rows} metrics rows -> {final}")
    return RunResult(
        model=student, checkpoint=final, metrics=metrics_path, diagnostics=diagnostics_path, steps=state.step, rows=rows
    )
