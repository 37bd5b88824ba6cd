"""Tests for the transformer, greedy decoding and checkpoints."""

import numpy as np
import pytest

from conftest import tiny_config
from maskd.masking import causal_mask
from maskd.model import (
    ModelConfig,
    build_model,
    extract_response_attention,
    forward,
    generate,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)
from maskd.tensor import Tensor
from maskd.types import BrokenInvariant, CapacityError, ConfigError, DimensionError, SegmentLayout, Sequence


def make_seq(n: int, visual: int = 0, question: int = 0, seed: int = 0) -> Sequence:
    ids = np.random.default_rng(seed).integers(0, 64, size=n)
    return Sequence(ids, SegmentLayout.from_lengths(visual, question, n - visual - question))


def rig_constant_argmax(model, token: int) -> None:
    """Make every position's logits identical with their argmax at ``token``."""
    model["ln_f.gain"].data[:] = 0.0
    model["ln_f.bias"].data[:] = 1.0
    model["head.weight"].data[:] = 0.0
    model["head.weight"].data[:, token] = 1.0


class TestModelConfig:
    def test_parameter_count_matches_built_model(self):
        config = ModelConfig(vocab_size=64, d_model=32, n_heads=2, n_layers=2, max_seq_len=128)
        d, v, n = 32, 64, 128
        by_hand = v * d + n * d + 2 * (12 * d * d + 13 * d) + 2 * d + d * v
        assert parameter_count(config) == by_hand
        assert build_model(config).num_parameters() == by_hand

    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigError, match="divisible"):
            ModelConfig(d_model=32, n_heads=3)

    def test_positive_sizes(self):
        with pytest.raises(ConfigError):
            ModelConfig(n_layers=0)

    def test_defaults_for_teacher_and_student(self):
        assert ModelConfig.teacher_default().n_layers == 4
        assert ModelConfig.teacher_default().d_model == 64
        assert ModelConfig.student_default().n_layers == 2
        assert ModelConfig.student_default().d_model == 32


class TestBuildModel:
    def test_same_seed_is_bit_identical(self):
        a, b = build_model(tiny_config(seed=4)), build_model(tiny_config(seed=4))
        assert list(a.params) == list(b.params)
        assert all(np.array_equal(a[k].data, b[k].data) for k in a.params)

    def test_different_seed_differs(self):
        a, b = build_model(tiny_config(seed=4)), build_model(tiny_config(seed=5))
        assert not np.array_equal(a["tok_emb"].data, b["tok_emb"].data)

    def test_clone_has_independent_storage(self):
        model = build_model(tiny_config())
        clone = model.clone()
        clone["head.weight"].data[:] = 0.0
        assert np.any(model["head.weight"].data != 0.0)

    def test_freeze(self):
        model = build_model(tiny_config()).freeze()
        assert not any(p.requires_grad for p in model.parameters())


class TestForward:
    def test_logits_shape(self):
        model = build_model(tiny_config())
        out = forward(model, make_seq(10), causal_mask(10))
        assert out.logits.shape == (10, 64)
        assert out.attention_avg is None

    def test_capture_does_not_change_logits(self):
        model = build_model(tiny_config())
        seq = make_seq(12)
        plain = forward(model, seq, causal_mask(12)).logits.data
        captured = forward(model, seq, causal_mask(12), capture_attention=True).logits.data
        assert np.array_equal(plain, captured)

    def test_attention_rows_are_causal_distributions(self):
        model = build_model(tiny_config())
        attention = forward(model, make_seq(9), causal_mask(9), capture_attention=True).attention_avg.data
        assert np.allclose(attention.sum(axis=1), 1.0)
        assert np.all(np.triu(attention, k=1) == 0.0)

    def test_mask_shape_mismatch(self):
        model = build_model(tiny_config())
        with pytest.raises(DimensionError):
            forward(model, make_seq(6), causal_mask(5))

    def test_capacity(self):
        model = build_model(tiny_config())
        with pytest.raises(CapacityError):
            forward(model, make_seq(65), causal_mask(65))

    def test_record_grad_needs_tape(self):
        model = build_model(tiny_config())
        with pytest.raises(BrokenInvariant):
            forward(model, make_seq(4), causal_mask(4), record_grad=True)

    def test_extra_mask_changes_later_rows_only(self):
        model = build_model(tiny_config())
        seq = make_seq(8)
        mask = causal_mask(8).entries.copy()
        mask[6, 2] = -np.inf
        plain = forward(model, seq, causal_mask(8)).logits.data
        masked = forward(model, seq, mask).logits.data
        assert np.array_equal(plain[:6], masked[:6])
        assert not np.allclose(plain[6], masked[6])

    def test_changing_a_token_leaves_earlier_rows_alone(self):
        model = build_model(tiny_config())
        seq = make_seq(12)
        plain = forward(model, seq, causal_mask(12)).logits.data
        rng = np.random.default_rng(4)
        for _ in range(20):
            j = int(rng.integers(1, 12))
            ids = seq.token_ids.copy()
            ids[j] = (ids[j] + int(rng.integers(1, 64))) % 64
            changed = forward(model, Sequence(ids, seq.layout), causal_mask(12)).logits.data
            assert np.array_equal(plain[:j], changed[:j]), j
            assert not np.allclose(plain[j], changed[j]), j


class TestExtractResponseAttention:
    def test_whole_sequence_response(self):
        model = build_model(tiny_config())
        seq = make_seq(7)
        full = forward(model, seq, causal_mask(7), capture_attention=True).attention_avg
        assert np.array_equal(extract_response_attention(full, seq.layout).data, full.data)

    def test_single_response_position(self):
        layout = SegmentLayout.from_lengths(3, 2, 1)
        out = extract_response_attention(Tensor(np.eye(6)), layout)
        assert out.shape == (1, 1)

    def test_indexes_response_block(self):
        model = build_model(tiny_config())
        seq = make_seq(12, visual=4, question=2, seed=3)
        full = forward(model, seq, causal_mask(12), capture_attention=True).attention_avg.data
        block = extract_response_attention(Tensor(full), seq.layout).data
        for i in range(6):
            for j in range(6):
                assert block[i, j] == full[6 + i, 6 + j]

    def test_requires_captured_map(self):
        with pytest.raises(BrokenInvariant):
            extract_response_attention(None, SegmentLayout.from_lengths(1, 1, 1))


class TestGenerate:
    def test_rigged_constant_argmax(self):
        model = build_model(tiny_config())
        rig_constant_argmax(model, 9)
        out = generate(model, np.array([1, 2, 3]), max_new=5)
        assert out.tolist() == [9] * 5

    def test_stops_after_end_token(self):
        model = build_model(tiny_config())
        rig_constant_argmax(model, 4)
        assert generate(model, np.array([1, 2]), max_new=5, end_token=4).tolist() == [4]

    def test_deterministic(self):
        model = build_model(tiny_config(seed=8))
        prompt = np.array([7, 35, 8, 36, 6, 7, 1])
        assert np.array_equal(generate(model, prompt, 10), generate(model, prompt, 10))

    def test_capacity(self):
        model = build_model(tiny_config())
        with pytest.raises(CapacityError):
            generate(model, np.arange(60) % 64, max_new=10)


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path):
        model = build_model(tiny_config(seed=3))
        loaded = load_checkpoint(save_checkpoint(model, tmp_path / "m.ckpt.json"))
        assert loaded.config == model.config
        assert all(np.array_equal(loaded[k].data, model[k].data) for k in model.params)

    def test_same_parameters_same_bytes(self, tmp_path):
        a = save_checkpoint(build_model(tiny_config(seed=3)), tmp_path / "a.json")
        b = save_checkpoint(build_model(tiny_config(seed=3)), tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_foreign_format(self, tmp_path):
        path = save_checkpoint(build_model(tiny_config()), tmp_path / "m.json")
        path.write_text(path.read_text().replace('"maskd-checkpoint"', '"other"'))
        with pytest.raises(BrokenInvariant):
            load_checkpoint(path)
