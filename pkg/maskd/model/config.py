"""Model hyperparameters."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from maskd.types import ConfigError

# Specials reserved at the bottom of every vocabulary (see maskd.corpus.vocab)
MIN_VOCAB = 4


class ModelConfig(BaseModel):
    """Shape and seed of a causal decoder.

    Constraint violations raise ConfigError naming the constraint.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    vocab_size: int = Field(default=64, description="Number of token ids")
    d_model: int = Field(default=32, description="Residual stream width")
    n_heads: int = Field(default=2, description="Attention heads per layer")
    n_layers: int = Field(default=2, description="Transformer blocks")
    max_seq_len: int = Field(default=128, description="Longest sequence the position table covers")
    seed: int = Field(default=0, description="Initialization seed")

    @model_validator(mode="after")
    def _check(self) -> ModelConfig:
        if self.vocab_size < MIN_VOCAB:
            raise ConfigError(f"vocab_size >= {MIN_VOCAB} required (got {self.vocab_size})")
        for name in ("d_model", "n_heads", "n_layers", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} >= 1 required (got {getattr(self, name)})")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model divisible by n_heads required (got d_model={self.d_model}, n_heads={self.n_heads})"
            )
        if self.seed < 0:
            raise ConfigError(f"seed >= 0 required (got {self.seed})")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @classmethod
    def teacher_default(cls, seed: int = 0) -> ModelConfig:
        return cls(vocab_size=64, d_model=64, n_heads=4, n_layers=4, max_seq_len=128, seed=seed)

    @classmethod
    def student_default(cls, seed: int = 0) -> ModelConfig:
        return cls(vocab_size=64, d_model=32, n_heads=2, n_layers=2, max_seq_len=128, seed=seed)


def parameter_count(config: ModelConfig) -> int:
    """Closed-form parameter count for the architecture built by build_model."""
    d, v, n = config.d_model, config.vocab_size, config.max_seq_len
    per_block = 12 * d * d + 13 * d
    return v * d + n * d + config.n_layers * per_block + 2 * d + d * v
