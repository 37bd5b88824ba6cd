"""Per-step diagnostics and the metrics log row derived from them."""

from __future__ import annotations

from pydantic import BaseModel, Field

METRICS_COLUMNS = (
    "step",
    "loss",
    "mean_r",
    "mean_rho",
    "mean_mask_count",
    "mean_masked_distance",
    "visual_attention_mass",
)


def _mean(values: list[float] | list[int]) -> float:
    return float(sum(values) / len(values)) if values else 0.0


class StepDiagnostics(BaseModel):
    """What one optimizer step saw and did.

    r, rho and mask_sizes hold one entry per response row of every sequence
    in the batch; distances hold one entry per masked prefix.
    """

    step: int = 0
    loss: float
    r: list[float] = Field(default_factory=list)
    rho: list[float] = Field(default_factory=list)
    mask_sizes: list[int] = Field(default_factory=list)
    distances: list[int] = Field(default_factory=list)
    visual_attention_mass: float = 0.0

    @property
    def mean_r(self) -> float:
        return _mean(self.r)

    @property
    def mean_rho(self) -> float:
        return _mean(self.rho)

    @property
    def mean_mask_count(self) -> float:
        return _mean(self.mask_sizes)

    @property
    def mean_masked_distance(self) -> float:
        return _mean(self.distances)

    def metrics_row(self) -> list[str]:
        values = (
            self.loss,
            self.mean_r,
            self.mean_rho,
            self.mean_mask_count,
            self.mean_masked_distance,
            self.visual_attention_mass,
        )
        return [str(self.step), *(repr(float(v)) for v in values)]
