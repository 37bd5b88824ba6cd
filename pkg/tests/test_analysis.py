"""Tests for attention curves, divergence decay, histograms and accuracy."""

import csv

import numpy as np
import pytest

from conftest import make_records, tiny_config
from maskd.analysis import (
    AccuracyResult,
    answer_accuracy,
    bucket_means,
    interval_kl_decay,
    load_diagnostics,
    masked_distance_histogram,
    mean_visual_attention_map,
    salient_mass_curve,
    visual_attention_curve,
    write_accuracy_csv,
    write_curve_csv,
    write_histogram_csv,
    write_map_csv,
    write_profile_csv,
)
from maskd.budget import tokenwise_reverse_kl
from maskd.corpus import layout_of
from maskd.corpus.vocab import END
from maskd.distill import StepDiagnostics
from maskd.masking import causal_mask
from maskd.model import build_model, forward
from maskd.types import DataError, SegmentLayout, Sequence


def uniform_attention(model):
    """Zero queries and keys so every head spreads its row evenly over the unmasked prefix."""
    for layer in range(model.config.n_layers):
        model[f"blocks.{layer}.attn.wq"].data[:] = 0.0
        model[f"blocks.{layer}.attn.wk"].data[:] = 0.0
    return model


def gold_decoder(records):
    gold = {tuple(r.prompt): r.response[1:] for r in records}
    return lambda model, prompt, max_new, end_token=None: np.array(gold[tuple(int(t) for t in prompt)])


class TestVisualAttentionCurve:
    def test_uniform_attention_fraction(self, records):
        model = uniform_attention(build_model(tiny_config()))
        curve = visual_attention_curve(model, records)
        start = 6 + 2
        expected = [6 / (start + i + 1) for i in range(18)]
        assert np.allclose(curve.fractions, expected, atol=1e-12)
        assert curve.counts.tolist() == [len(records)] * 18

    def test_no_visual_span(self):
        model = build_model(tiny_config())
        seq = Sequence(np.array([6, 7, 1, 9, 10]), SegmentLayout.from_lengths(0, 2, 3))
        curve = visual_attention_curve(model, [seq])
        assert curve.fractions.tolist() == [0.0, 0.0, 0.0]
        assert curve.mean == 0.0

    def test_order_of_samples_does_not_matter(self, student, records):
        a = visual_attention_curve(student, records)
        b = visual_attention_curve(student, records[::-1])
        assert np.allclose(a.fractions, b.fractions, atol=1e-12)

    def test_fractions_are_fractions(self, student, records):
        curve = visual_attention_curve(student, records)
        assert np.all((curve.fractions >= 0.0) & (curve.fractions <= 1.0))

    def test_no_samples(self, student):
        with pytest.raises(DataError):
            visual_attention_curve(student, [])


class TestVisualAttentionMap:
    def test_uniform_attention_is_flat(self, records):
        model = uniform_attention(build_model(tiny_config()))
        values = mean_visual_attention_map(model, records[0])
        assert len(values) == 6
        assert np.allclose(values, np.mean([1 / (p + 1) for p in range(8, 26)]), atol=1e-12)


class TestIntervalKLDecay:
    def test_same_model_is_zero(self, student, records):
        profile = interval_kl_decay(student, student, records, k_intervals=4)
        assert np.all(profile.means == 0.0)
        assert profile.counts.sum() == 18 * len(records)

    def test_single_bucket_is_global_mean(self, teacher, student, records):
        tokens = []
        for record in records:
            seq = layout_of(record, 64)
            rows = slice(seq.layout.response.start, seq.layout.response.end)
            s = forward(student, seq, causal_mask(len(seq))).logits.data[rows]
            t = forward(teacher, seq, causal_mask(len(seq))).logits.data[rows]
            tokens.extend(tokenwise_reverse_kl(s, t, tau=1.0).r)
        profile = interval_kl_decay(teacher, student, records, k_intervals=1)
        assert profile.means[0] == pytest.approx(np.mean(tokens), rel=1e-12)

    def test_no_traces(self, teacher, student):
        with pytest.raises(DataError):
            interval_kl_decay(teacher, student, [])


class TestBucketMeans:
    def test_two_buckets(self):
        profile = bucket_means([np.array([1.0, 2.0, 3.0, 4.0])], 2)
        assert profile.means.tolist() == [1.5, 3.5]
        assert profile.counts.tolist() == [2, 2]

    def test_short_trace_leaves_buckets_empty(self):
        profile = bucket_means([np.array([5.0])], 3)
        assert profile.means[0] == 5.0
        assert np.isnan(profile.means[1:]).all()
        assert profile.counts.tolist() == [1, 0, 0]

    def test_quartile_means(self):
        profile = bucket_means([np.arange(8, dtype=float)], 8)
        assert profile.quartile_means() == (0.5, 6.5)


class TestMaskedDistanceHistogram:
    def test_empty(self):
        assert masked_distance_histogram([]) == {}
        assert masked_distance_histogram([StepDiagnostics(loss=0.0)]) == {}

    def test_counts(self):
        diags = [StepDiagnostics(loss=0.1, distances=[3, 2, 3]), StepDiagnostics(loss=0.1, distances=[5])]
        assert masked_distance_histogram(diags) == {2: 1, 3: 2, 5: 1}

    def test_load_diagnostics(self, tmp_path):
        path = tmp_path / "diagnostics.jsonl"
        path.write_text(StepDiagnostics(step=4, loss=0.5, distances=[3]).model_dump_json() + "\n")
        (diag,) = load_diagnostics(path)
        assert diag.step == 4
        assert masked_distance_histogram([diag]) == {3: 1}


class TestAnswerAccuracy:
    def test_gold_decoder_is_perfect(self, monkeypatch, student):
        samples = make_records(6, seed=3, split="eval")
        monkeypatch.setattr("maskd.distill.teacher.generate", gold_decoder(samples))
        result = answer_accuracy(student, samples)
        assert (result.n, result.correct, result.fraction) == (6, 6, 1.0)

    def test_no_answer_is_wrong(self, monkeypatch, student):
        monkeypatch.setattr(
            "maskd.distill.teacher.generate", lambda model, prompt, max_new, end_token=None: np.array([END])
        )
        assert answer_accuracy(student, make_records(4)).fraction == 0.0

    def test_workers_match_sequential(self, student):
        samples = make_records(6, seed=5)
        a = answer_accuracy(student, samples, max_new=16)
        b = answer_accuracy(student, samples, max_new=16, workers=2)
        assert a == b

    def test_no_samples(self, student):
        with pytest.raises(DataError):
            answer_accuracy(student, [])


class TestSalientMassCurve:
    def test_rows_need_k_prefixes(self, student, records):
        curve = salient_mass_curve(student, records, max_k=5)
        assert np.all((curve.mass > 0.0) & (curve.mass <= 1.0 + 1e-12))
        assert curve.counts.tolist() == [k * len(records) for k in (17, 16, 15, 14, 13)]

    def test_invalid(self, student, records):
        with pytest.raises(DataError):
            salient_mass_curve(student, records, max_k=0)


class TestExport:
    def test_headers(self, tmp_path, student, records):
        curve = visual_attention_curve(student, records[:2])
        profile = bucket_means([np.array([1.0, 2.0])], 2)
        paths = {
            "position,fraction,n": write_curve_csv(curve, tmp_path / "curve.csv"),
            "interval,mean_kl,n": write_profile_csv(profile, tmp_path / "kl_decay.csv"),
            "distance,count": write_histogram_csv({2: 4}, tmp_path / "histogram.csv"),
            "visual_position,mean_attention": write_map_csv(np.zeros(3), tmp_path / "map.csv"),
            "split,n,correct,fraction": write_accuracy_csv([AccuracyResult("eval", 4, 1)], tmp_path / "accuracy.csv"),
        }
        for header, path in paths.items():
            assert path.read_text().splitlines()[0] == header

    def test_accuracy_row(self, tmp_path):
        path = write_accuracy_csv([AccuracyResult("eval", 4, 1)], tmp_path / "accuracy.csv")
        assert list(csv.reader(path.open()))[1] == ["eval", "4", "1", "0.25"]
