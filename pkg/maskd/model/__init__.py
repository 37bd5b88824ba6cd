"""Model: small causal decoder transformer with attention capture.

Usage:
    from maskd.model import ModelConfig, build_model, forward
    from maskd.masking import causal_mask

    model = build_model(ModelConfig.student_default())
    out = forward(model, seq, causal_mask(len(seq)), capture_attention=True)
    out.attention_avg  # N x N, averaged over heads then layers
"""

from maskd.model.checkpoint import CheckpointFile, load_checkpoint, save_checkpoint
from maskd.model.config import ModelConfig, parameter_count
from maskd.model.generate import generate
from maskd.model.transformer import ForwardOutput, Model, build_model, extract_response_attention, forward

__all__ = [
    "ModelConfig",
    "parameter_count",
    "Model",
    "ForwardOutput",
    "build_model",
    "forward",
    "extract_response_attention",
    "generate",
    "CheckpointFile",
    "save_checkpoint",
    "load_checkpoint",
]
