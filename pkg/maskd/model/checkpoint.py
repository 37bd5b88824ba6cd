"""Checkpoint files: versioned JSON with base64 float64 payloads.

Field order is fixed and arrays are stored as little-endian bytes, so the
same parameters always serialize to the same bytes and load back bit-exact.
"""

from __future__ import annotations

import base64
import logging
import os
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from maskd.model.config import ModelConfig
from maskd.model.transformer import Model
from maskd.tensor.tensor import Tensor
from maskd.types import BrokenInvariant

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "maskd-checkpoint"
CHECKPOINT_VERSION = 1


class ParamRecord(BaseModel):
    name: str
    shape: list[int]
    data: str = Field(..., description="base64 of little-endian float64 bytes")


class CheckpointFile(BaseModel):
    format: str = CHECKPOINT_FORMAT
    version: int = CHECKPOINT_VERSION
    config: ModelConfig
    params: list[ParamRecord]


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(record: ParamRecord) -> np.ndarray:
    raw = base64.b64decode(record.data)
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(record.shape)


def save_checkpoint(model: Model, path: Path) -> Path:
    """Write ``model`` to ``path`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = CheckpointFile(
        config=model.config,
        params=[ParamRecord(name=n, shape=list(p.shape), data=_encode(p.data)) for n, p in model.params.items()],
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(body.model_dump_json() + "\n", encoding="utf-8")
    os.replace(tmp, path)
    logger.debug(f"Saved checkpoint {path}")
    return path


def load_checkpoint(path: Path) -> Model:
    """Read a checkpoint written by save_checkpoint.

    Raises:
        BrokenInvariant: If the file is not a maskd checkpoint of a known version
    """
    path = Path(path)
    body = CheckpointFile.model_validate_json(path.read_text(encoding="utf-8"))
    if body.format != CHECKPOINT_FORMAT or body.version != CHECKPOINT_VERSION:
        raise BrokenInvariant(f"{path}: unsupported checkpoint {body.format!r} v{body.version}")
    params = {r.name: Tensor(_decode(r), requires_grad=True, name=r.name) for r in body.params}
    return Model(body.config, params)
