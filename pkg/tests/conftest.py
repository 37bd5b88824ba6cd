"""Shared fixtures: tiny models, short sequences and small corpora.

Everything here is sized so a forward pass takes milliseconds; the end-to-end
runs that need real training live behind the ``slow`` marker.
"""

import logfire
import pytest

from maskd.corpus import CorpusParams, CorpusRecord, gen_sample, layout_of
from maskd.model import ModelConfig, build_model
from maskd.tensor import rng_stream

logfire.configure(send_to_logfire=False, console=False)

SMALL_PARAMS = CorpusParams(n_facts=3, hops=2)


def tiny_config(seed: int = 0, d_model: int = 16, n_layers: int = 2) -> ModelConfig:
    return ModelConfig(vocab_size=64, d_model=d_model, n_heads=2, n_layers=n_layers, max_seq_len=64, seed=seed)


def make_records(
    n: int, seed: int = 0, params: CorpusParams = SMALL_PARAMS, split: str = "train"
) -> list[CorpusRecord]:
    return [CorpusRecord.from_sample(gen_sample(rng_stream(seed, i), params), split) for i in range(n)]


@pytest.fixture(autouse=True)
def _isolated_env(tmp_path, monkeypatch):
    """Keep runs out of the real home directory and progress bars off."""
    monkeypatch.setenv("MASKD_HOME", str(tmp_path / "home"))
    monkeypatch.setenv("MASKD_PROGRESS", "false")


@pytest.fixture
def student():
    return build_model(tiny_config(seed=2))


@pytest.fixture
def teacher():
    return build_model(tiny_config(seed=1)).freeze()


@pytest.fixture
def records():
    return make_records(10)


@pytest.fixture
def batch(records):
    return [layout_of(r, 64) for r in records[:2]]
