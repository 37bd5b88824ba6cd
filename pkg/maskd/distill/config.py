"""Distillation hyperparameters and ablation switches."""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from maskd.budget.schedule import DEFAULT_EPSILON, DEFAULT_RHO_MAX, DEFAULT_RHO_MIN
from maskd.budget.thresholds import ThresholdMode
from maskd.masking.selection import Strategy
from maskd.types import ConfigError, UnknownOption


class LossKind(StrEnum):
    REVERSE = "reverse"
    FORWARD = "forward"
    MIXED = "mixed"


class TraceSource(StrEnum):
    """Model whose greedy generations become the distill set."""

    TEACHER = "teacher"
    STUDENT = "student"


class DistillMaskKind(StrEnum):
    SALIENT = "salient"
    CAUSAL_ONLY = "causal_only"
    REGION_VISUAL = "region_visual"
    REGION_QUESTION = "region_question"


def _enum_field(enum: type[StrEnum], kind: str, value: object) -> StrEnum:
    try:
        return enum(value)
    except ValueError:
        raise UnknownOption(kind, value, [m.value for m in enum]) from None


class DistillConfig(BaseModel):
    """Everything that shapes a distillation or self-distillation run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    tau: float = Field(default=2.0, description="Distillation temperature")
    rho_min: float = Field(default=DEFAULT_RHO_MIN, description="Lowest masking budget")
    rho_max: float = Field(default=DEFAULT_RHO_MAX, description="Highest masking budget")
    epsilon: float = Field(default=DEFAULT_EPSILON, description="Floor inside the log-scaled difficulty")
    loss_kind: LossKind = LossKind.REVERSE
    mask_kind: DistillMaskKind = DistillMaskKind.SALIENT
    selection_strategy: Strategy = Strategy.HIGH_ATTENTION
    threshold_mode: ThresholdMode = ThresholdMode.SELF_PACED
    threshold_param: float = Field(default=0.4, description="Static rho, attention cut-off or masking ratio")
    aux_weight_shared: bool = Field(default=True, description="Auxiliary pass uses the live student")
    exclude_immediate_prev: bool = Field(default=True, description="Never mask the preceding token")
    scale_divergence_by_tau: bool = Field(default=True, description="Temper both sides of the token-wise KL")
    lr: float = Field(default=1e-3, description="Adam learning rate")
    epochs: int = Field(default=2, description="Passes over the distill set")
    batch_size: int = Field(default=8, description="Sequences per optimizer step")
    seed: int = Field(default=0, description="Shuffling and random-selection seed")
    diag_interval: int = Field(default=10, description="Steps between metrics rows")
    dump_masks: bool = Field(default=False, description="Write mask and schedule CSVs at diagnostic steps")

    @field_validator("loss_kind", mode="before")
    @classmethod
    def _loss_kind(cls, v: object) -> StrEnum:
        return _enum_field(LossKind, "loss kind", v)

    @field_validator("mask_kind", mode="before")
    @classmethod
    def _mask_kind(cls, v: object) -> StrEnum:
        return _enum_field(DistillMaskKind, "mask kind", v)

    @field_validator("selection_strategy", mode="before")
    @classmethod
    def _strategy(cls, v: object) -> StrEnum:
        return _enum_field(Strategy, "selection strategy", v)

    @field_validator("threshold_mode", mode="before")
    @classmethod
    def _threshold_mode(cls, v: object) -> StrEnum:
        return _enum_field(ThresholdMode, "threshold mode", v)

    @model_validator(mode="after")
    def _check(self) -> DistillConfig:
        if not self.tau > 0:
            raise ConfigError(f"tau > 0 required (got {self.tau})")
        if not 0.0 <= self.rho_min <= self.rho_max <= 1.0:
            raise ConfigError(f"0 <= rho_min <= rho_max <= 1 required (got {self.rho_min}, {self.rho_max})")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon > 0 required (got {self.epsilon})")
        if not 0.0 <= self.threshold_param <= 1.0:
            raise ConfigError(f"0 <= threshold_param <= 1 required (got {self.threshold_param})")
        if self.epochs < 1:
            raise ConfigError(f"epochs >= 1 required (got {self.epochs})")
        for name in ("batch_size", "diag_interval"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} >= 1 required (got {getattr(self, name)})")
        if not self.lr > 0:
            raise ConfigError(f"lr > 0 required (got {self.lr})")
        if self.seed < 0:
            raise ConfigError(f"seed >= 0 required (got {self.seed})")
        return self


class TeacherConfig(BaseModel):
    """Supervised teacher training."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = 3e-3
    epochs: int = 3
    batch_size: int = 8
    seed: int = 0
    diag_interval: int = 10
    max_new: int = 64

    @model_validator(mode="after")
    def _check(self) -> TeacherConfig:
        if self.epochs < 0:
            raise ConfigError(f"epochs >= 0 required (got {self.epochs})")
        for name in ("batch_size", "diag_interval", "max_new"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} >= 1 required (got {getattr(self, name)})")
        if not self.lr > 0:
            raise ConfigError(f"lr > 0 required (got {self.lr})")
        return self
