"""Desk-scale end-to-end runs on the two-hop lookup corpus.

Testing Strategy:
- One teacher (4 layers, width 64) is trained once per module on a 10k-sample
  corpus and reused by every test
- Students (2 layers, width 32) are distilled per seed and compared in pairs
- Everything here takes minutes, so the module is marked slow

Run: uv run pytest tests/test_acceptance.py -v -m slow
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import pytest

from maskd.ablate import AblationGrid, run_ablation
from maskd.analysis import answer_accuracy, interval_kl_decay, visual_attention_curve
from maskd.corpus import CorpusParams, CorpusRecord, file_sha256, gen_corpus, load_corpus
from maskd.distill import DistillConfig, TeacherConfig, build_distill_set, run_training, train_teacher
from maskd.model import Model, ModelConfig, build_model

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
N_SAMPLES = 10_000
N_DISTILL = 2_000
N_EVAL = 200


# ─────────────────────────────────────────────────────────────────────────────
# Fixtures
# ─────────────────────────────────────────────────────────────────────────────


@dataclass
class Pipeline:
    corpus: Path
    teacher: Model
    distill_set: list[CorpusRecord]
    eval_set: list[CorpusRecord]
    root: Path


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory) -> Pipeline:
    root = tmp_path_factory.mktemp("acceptance")
    corpus = root / "corpus.jsonl"
    gen_corpus(N_SAMPLES, 0, CorpusParams(n_facts=6, hops=2), corpus)
    train = load_corpus(corpus, "train")
    run = train_teacher(ModelConfig.teacher_default(), train, TeacherConfig(epochs=3, batch_size=8))
    distill_set = build_distill_set(run.model, train[:N_DISTILL], max_new=64)
    return Pipeline(corpus, run.model, distill_set.records, load_corpus(corpus, "eval")[:N_EVAL], root)


def distill(pipeline: Pipeline, mask_kind: str, seed: int) -> Model:
    cfg = DistillConfig(mask_kind=mask_kind, seed=seed, epochs=2, batch_size=8, diag_interval=50)
    student = build_model(ModelConfig.student_default(seed=seed))
    run_dir = pipeline.root / f"{mask_kind}-seed{seed}"
    return run_training(cfg, pipeline.teacher.clone(), student, pipeline.distill_set, run_dir).model


@pytest.fixture(scope="module")
def students(pipeline) -> dict[tuple[str, int], Model]:
    return {(kind, seed): distill(pipeline, kind, seed) for kind in ("salient", "causal_only") for seed in SEEDS}


# ─────────────────────────────────────────────────────────────────────────────
# Tests
# ─────────────────────────────────────────────────────────────────────────────


class TestCorpus:
    def test_full_corpus_is_byte_identical(self, tmp_path):
        a = gen_corpus(N_SAMPLES, 0, CorpusParams(), tmp_path / "a.jsonl")
        b = gen_corpus(N_SAMPLES, 0, CorpusParams(), tmp_path / "b.jsonl")
        assert a.sha256 == b.sha256 == file_sha256(tmp_path / "b.jsonl")


class TestTeacher:
    def test_held_out_accuracy(self, pipeline):
        assert answer_accuracy(pipeline.teacher, pipeline.eval_set).fraction >= 0.9


class TestShortcut:
    def test_late_tokens_are_easier_under_naive_kd(self, pipeline, students):
        """Divergence drops along the response once the answer can be copied from the think text."""
        traces = pipeline.distill_set[:N_EVAL]
        for seed in SEEDS:
            profile = interval_kl_decay(pipeline.teacher, students["causal_only", seed], traces, 8)
            first, last = profile.quartile_means()
            assert last < first, f"seed {seed}: first quarter {first}, last quarter {last}"


class TestVisualAnchoring:
    def test_salient_masking_looks_at_the_fact_table(self, pipeline, students):
        for seed in SEEDS:
            masked = visual_attention_curve(students["salient", seed], pipeline.eval_set).mean
            naive = visual_attention_curve(students["causal_only", seed], pipeline.eval_set).mean
            assert masked > naive, f"seed {seed}: salient {masked} vs causal {naive}"

    def test_salient_masking_is_at_least_as_accurate(self, pipeline, students):
        for seed in SEEDS:
            masked = answer_accuracy(students["salient", seed], pipeline.eval_set).fraction
            naive = answer_accuracy(students["causal_only", seed], pipeline.eval_set).fraction
            assert masked >= naive, f"seed {seed}: salient {masked} vs causal {naive}"


class TestRegionAblation:
    def test_harness_completes(self, pipeline):
        grid = AblationGrid(mask_kinds=("salient", "region_visual", "region_question"))
        results, summary = run_ablation(
            DistillConfig(epochs=1, batch_size=8, diag_interval=50),
            grid,
            pipeline.teacher,
            ModelConfig.student_default(),
            pipeline.distill_set,
            pipeline.eval_set,
            pipeline.root / "ablation",
            file_sha256(pipeline.corpus),
            workers=3,
        )
        with results.open() as f:
            rows = list(csv.DictReader(f))
        assert [r["status"] for r in rows] == ["ok", "ok", "ok"]
        assert summary.exists()
