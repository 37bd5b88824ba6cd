"""Distill: teacher training, masked distillation and self-distillation.

Usage:
    from maskd.distill import DistillConfig, distill_step
    from maskd.tensor import AdamState

    state = AdamState()
    diag = distill_step(teacher, student, batch, DistillConfig(), state)
    diag.loss, diag.mean_rho, diag.distances
"""

from maskd.distill.config import DistillConfig, DistillMaskKind, LossKind, TeacherConfig, TraceSource
from maskd.distill.diagnostics import METRICS_COLUMNS, StepDiagnostics
from maskd.distill.loss import kd_loss
from maskd.distill.run import RunResult, diagnostic_steps, frozen_aux_model, run_training
from maskd.distill.step import (
    DistillTarget,
    distill_step,
    distill_step_with_targets,
    masked_loss,
    prepare_targets,
    self_distill_step,
    self_distill_step_with_targets,
    visual_attention_mass,
)
from maskd.distill.teacher import DistillSet, TeacherRun, build_distill_set, response_cross_entropy, train_teacher

__all__ = [
    # Config
    "DistillConfig",
    "TeacherConfig",
    "LossKind",
    "DistillMaskKind",
    "TraceSource",
    # Loss and steps
    "kd_loss",
    "DistillTarget",
    "prepare_targets",
    "masked_loss",
    "visual_attention_mass",
    "distill_step",
    "distill_step_with_targets",
    "self_distill_step",
    "self_distill_step_with_targets",
    "StepDiagnostics",
    "METRICS_COLUMNS",
    # Teacher
    "TeacherRun",
    "train_teacher",
    "response_cross_entropy",
    "DistillSet",
    "build_distill_set",
    # Runs
    "RunResult",
    "run_training",
    "diagnostic_steps",
    "frozen_aux_model",
]
