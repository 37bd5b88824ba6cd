"""One optimizer step of masked distillation.

A step runs three forwards per sequence:

1. teacher, causal mask, no gradient -> target logits on response rows
2. auxiliary student, causal mask, no gradient, attention captured ->
   token-wise divergence, budgets, selection, masked matrix
3. student under the masked matrix, recorded -> KL loss

Stages 1 and 2 only produce constants (DistillTarget), so the recorded
gradient is the gradient of the masked-forward loss alone. Self-distillation
reuses one causal forward of the model for stages 1 and 2 and then shares
stage 3 with distill_step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import logfire
import numpy as np

from maskd.budget.divergence import DivergenceTrace, tokenwise_reverse_kl
from maskd.budget.schedule import BudgetSchedule, self_paced_thresholds, static_threshold
from maskd.budget.thresholds import ThresholdMode, alt_threshold_modes
from maskd.distill.config import DistillConfig, DistillMaskKind
from maskd.distill.diagnostics import StepDiagnostics
from maskd.distill.loss import kd_loss
from maskd.masking.masks import AttentionMaskMatrix, build_region_mask, build_salient_mask, causal_mask
from maskd.masking.selection import SalientSelection, SelectionEntry, select_for_sequence
from maskd.model.transformer import ForwardOutput, Model, extract_response_attention, forward
from maskd.tensor import ops
from maskd.tensor.optim import AdamState, adam_step, zero_grad
from maskd.tensor.rng import rng_stream
from maskd.tensor.tensor import ComputationTape, Tensor, backward
from maskd.types import BrokenInvariant, InvariantViolation, NumericError, SegmentLayout, Sequence, TrainingAborted

logger = logging.getLogger(__name__)

# Stream tag for random prefix selection, keyed further by optimizer step
SELECTION_STREAM = 1


@dataclass
class DistillTarget:
    """Constants harvested by the no-gradient passes for one sequence."""

    seq: Sequence
    teacher_logits: np.ndarray
    trace: DivergenceTrace
    schedule: BudgetSchedule
    selection: SalientSelection
    mask: AttentionMaskMatrix


def response_rows(layout: SegmentLayout) -> slice:
    return slice(layout.response.start, layout.response.end)


def _empty_selection(layout: SegmentLayout, schedule: BudgetSchedule) -> SalientSelection:
    return SalientSelection(
        [
            SelectionEntry(position=layout.response_position(n), rho=float(schedule.rho[n - 1]), achieved_mass=0.0)
            for n in range(1, len(layout.response) + 1)
        ]
    )


def _schedule(trace: DivergenceTrace, cfg: DistillConfig) -> BudgetSchedule:
    if cfg.threshold_mode == ThresholdMode.SELF_PACED:
        return self_paced_thresholds(trace, cfg.rho_min, cfg.rho_max, cfg.epsilon)
    return static_threshold(len(trace), cfg.threshold_param)


def plan_target(
    seq: Sequence,
    teacher_out: ForwardOutput,
    aux_out: ForwardOutput,
    cfg: DistillConfig,
    rng: np.random.Generator,
) -> DistillTarget:
    """Turn the teacher and auxiliary forwards into a masked-forward target."""
    layout = seq.layout
    rows = response_rows(layout)
    teacher_logits = teacher_out.logits.data[rows].copy()
    trace = tokenwise_reverse_kl(
        aux_out.logits.data[rows], teacher_logits, cfg.tau, tau_scaled=cfg.scale_divergence_by_tau
    )
    schedule = _schedule(trace, cfg)

    match cfg.mask_kind:
        case DistillMaskKind.CAUSAL_ONLY:
            selection, mask = _empty_selection(layout, schedule), causal_mask(layout.total)
        case DistillMaskKind.REGION_VISUAL:
            selection, mask = _empty_selection(layout, schedule), build_region_mask("visual", layout)
        case DistillMaskKind.REGION_QUESTION:
            selection, mask = _empty_selection(layout, schedule), build_region_mask("question", layout)
        case DistillMaskKind.SALIENT:
            rule = None
            if cfg.threshold_mode in (ThresholdMode.ATTENTION_THRESHOLD, ThresholdMode.MASKING_RATIO):
                rule = alt_threshold_modes(trace, cfg.threshold_mode, cfg.threshold_param)
            a_resp = extract_response_attention(aux_out.attention_avg, layout)
            selection = select_for_sequence(
                a_resp,
                layout,
                schedule.rho,
                strategy=cfg.selection_strategy,
                rule=rule,
                exclude_immediate_prev=cfg.exclude_immediate_prev,
                rng=rng,
            )
            mask = build_salient_mask(selection, layout, allow_immediate_prev=not cfg.exclude_immediate_prev)

    return DistillTarget(seq, teacher_logits, trace, schedule, selection, mask)


def _check_batch(batch: Sequence | list[Sequence]) -> list[Sequence]:
    seqs = [batch] if isinstance(batch, Sequence) else list(batch)
    if not seqs:
        raise InvariantViolation("a step needs at least one sequence")
    for seq in seqs:
        if len(seq.layout.response) < 1:
            raise InvariantViolation("training sequences need a nonempty response span")
    return seqs


def prepare_targets(
    teacher: Model,
    aux: Model,
    batch: Sequence | list[Sequence],
    cfg: DistillConfig,
    rng: np.random.Generator,
) -> list[DistillTarget]:
    """Run the no-gradient teacher and auxiliary forwards for every sequence.

    When ``teacher is aux`` a single causal forward serves both roles.
    """
    needs_attention = cfg.mask_kind == DistillMaskKind.SALIENT
    targets = []
    for seq in _check_batch(batch):
        causal = causal_mask(len(seq))
        aux_out = forward(aux, seq, causal, capture_attention=needs_attention)
        teacher_out = aux_out if teacher is aux else forward(teacher, seq, causal)
        targets.append(plan_target(seq, teacher_out, aux_out, cfg, rng))
    return targets


def visual_attention_mass(attention_avg: Tensor, layout: SegmentLayout) -> float:
    """Mean over response rows of the attention mass on visual columns."""
    if len(layout.visual) == 0 or len(layout.response) == 0:
        return 0.0
    rows = attention_avg.data[response_rows(layout)]
    return float(rows[:, layout.visual.start : layout.visual.end].sum(axis=1).mean())


def masked_loss(student: Model, targets: list[DistillTarget], cfg: DistillConfig) -> tuple[Tensor, float]:
    """Batch-mean KD loss of the student under each target's mask.

    Records on the caller's tape when one is active. Returns the loss and
    the mean visual-attention mass of the masked forwards.
    """
    losses = []
    masses = []
    for t in targets:
        out = forward(student, t.seq, t.mask, capture_attention=True, record_grad=True)
        logits = ops.take_rows(out.logits, response_rows(t.seq.layout))
        losses.append(kd_loss(logits, t.teacher_logits, cfg.tau, cfg.loss_kind))
        masses.append(visual_attention_mass(out.attention_avg, t.seq.layout))
    loss = losses[0] if len(losses) == 1 else ops.mean(ops.stack(losses))
    return loss, float(np.mean(masses))


def _optimize(
    student: Model,
    targets: list[DistillTarget],
    cfg: DistillConfig,
    opt_state: AdamState,
) -> StepDiagnostics:
    params = student.parameters()
    zero_grad(params)
    with ComputationTape() as tape:
        loss, mass = masked_loss(student, targets, cfg)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(f"loss is {value}")
    backward(loss, tape)
    adam_step(params, opt_state, cfg.lr)

    rows = [t.mask.extra_masked()[response_rows(t.seq.layout)].sum(axis=1) for t in targets]
    return StepDiagnostics(
        step=opt_state.step - 1,
        loss=value,
        r=[float(x) for t in targets for x in t.trace.r],
        rho=[float(x) for t in targets for x in t.schedule.rho],
        mask_sizes=[int(x) for r in rows for x in r],
        distances=[d for t in targets for d in t.selection.distances],
        visual_attention_mass=mass,
    )


def _run_step(
    teacher: Model,
    aux: Model,
    student: Model,
    batch: Sequence | list[Sequence],
    cfg: DistillConfig,
    opt_state: AdamState,
    rng: np.random.Generator | None,
) -> tuple[StepDiagnostics, list[DistillTarget]]:
    rng = rng if rng is not None else rng_stream(cfg.seed, SELECTION_STREAM, opt_state.step)
    # Stage timings are recorded on the spans, not in StepDiagnostics.
    try:
        with logfire.span("auxiliary stage", step=opt_state.step):
            targets = prepare_targets(teacher, aux, batch, cfg, rng)
        with logfire.span("optimized stage", step=opt_state.step):
            diag = _optimize(student, targets, cfg, opt_state)
    except NumericError as e:
        raise TrainingAborted(f"step {opt_state.step}: {e}") from e
    logger.debug(f"step {diag.step}: loss={diag.loss:.6f} mean_rho={diag.mean_rho:.3f}")
    return diag, targets


def distill_step(
    teacher: Model,
    student: Model,
    seq: Sequence | list[Sequence],
    cfg: DistillConfig,
    opt_state: AdamState,
    *,
    aux: Model | None = None,
    rng: np.random.Generator | None = None,
) -> StepDiagnostics:
    """Distill ``teacher`` into ``student`` on one sequence or a batch.

    The auxiliary pass runs on the live student unless the config turns
    weight sharing off, in which case ``aux`` (a frozen, separately
    initialized model) is required.

    Raises:
        TrainingAborted: If any stage produces non-finite values
    """
    diag, _ = distill_step_with_targets(teacher, student, seq, cfg, opt_state, aux=aux, rng=rng)
    return diag


def distill_step_with_targets(
    teacher: Model,
    student: Model,
    seq: Sequence | list[Sequence],
    cfg: DistillConfig,
    opt_state: AdamState,
    *,
    aux: Model | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[StepDiagnostics, list[DistillTarget]]:
    """distill_step that also returns the per-sequence targets (for dumps)."""
    if teacher is student:
        raise BrokenInvariant("distill_step needs distinct teacher and student; use self_distill_step")
    if cfg.aux_weight_shared:
        aux = student
    elif aux is None:
        raise BrokenInvariant("aux_weight_shared=False needs a separate auxiliary model")
    return _run_step(teacher, aux, student, seq, cfg, opt_state, rng)


def self_distill_step(
    model: Model,
    seq: Sequence | list[Sequence],
    cfg: DistillConfig,
    opt_state: AdamState,
    *,
    rng: np.random.Generator | None = None,
) -> StepDiagnostics:
    """The model's own detached causal predictions are the target of its masked pass."""
    diag, _ = self_distill_step_with_targets(model, seq, cfg, opt_state, rng=rng)
    return diag


def self_distill_step_with_targets(
    model: Model,
    seq: Sequence | list[Sequence],
    cfg: DistillConfig,
    opt_state: AdamState,
    *,
    rng: np.random.Generator | None = None,
) -> tuple[StepDiagnostics, list[DistillTarget]]:
    return _run_step(model, model, model, seq, cfg, opt_state, rng)
