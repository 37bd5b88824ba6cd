"""Tests for the command-line harness: exit codes, precedence and outputs."""

import csv
from pathlib import Path

import numpy as np
import pytest

from conftest import SMALL_PARAMS, make_records, tiny_config
from maskd.cli import main
from maskd.corpus import file_sha256, gen_corpus, load_corpus, write_records
from maskd.corpus.vocab import END
from maskd.model import build_model, save_checkpoint
from maskd.runs import parse_config_text

TINY = ["--d-model", "16", "--n-layers", "1", "--max-seq-len", "64"]
FAST = ["--epochs", "1", "--batch-size", "4", "--diag-interval", "1"]


@pytest.fixture
def inputs(tmp_path):
    """A teacher checkpoint, a distill set and a small corpus on disk."""
    teacher = save_checkpoint(build_model(tiny_config(seed=1)), tmp_path / "teacher.ckpt.json")
    distill_set = write_records(make_records(6), tmp_path / "distill_set.jsonl", "maskd-distill-set test")
    corpus = tmp_path / "corpus.jsonl"
    gen_corpus(20, 0, SMALL_PARAMS, corpus)
    return {"teacher": teacher, "distill_set": distill_set, "corpus": corpus, "out": tmp_path / "runs"}


def distill_argv(inputs, *extra: str) -> list[str]:
    return [
        "distill",
        "--teacher",
        str(inputs["teacher"]),
        "--distill-set",
        str(inputs["distill_set"]),
        "--out-dir",
        str(inputs["out"]),
        *TINY,
        *FAST,
        *extra,
    ]


class TestExitCodes:
    def test_gen_corpus_empty(self, tmp_path, capsys):
        assert main(["gen-corpus", "--n", "0", "--out", str(tmp_path / "c.jsonl")]) == 0
        assert "0 samples" in capsys.readouterr().out

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["gen-corpus", "--n", "5"]) == 2
        assert "usage:" in capsys.readouterr().err

    def test_unknown_choice_is_usage_error(self, inputs):
        assert main(distill_argv(inputs, "--loss", "bogus")) == 2

    def test_missing_teacher_is_usage_error(self, inputs, capsys):
        argv = ["distill", "--distill-set", str(inputs["distill_set"]), "--out-dir", str(inputs["out"])]
        assert main(argv) == 2
        assert "--teacher is required" in capsys.readouterr().err

    def test_missing_file_is_failure(self, inputs, tmp_path, capsys):
        argv = ["distill", "--teacher", str(tmp_path / "nope.json"), "--distill-set", str(inputs["distill_set"])]
        assert main(argv) == 1
        assert "missing teacher checkpoint" in capsys.readouterr().err

    def test_rerun_needs_force(self, inputs):
        assert main(distill_argv(inputs, "--name", "d")) == 0
        assert main(distill_argv(inputs, "--name", "d")) == 1
        assert main(distill_argv(inputs, "--name", "d", "--force")) == 0

    def test_invalid_value_is_failure(self, inputs):
        assert main(distill_argv(inputs, "--rho-min", "0.6", "--rho-max", "0.4")) == 1

    def test_unknown_config_key_is_failure(self, inputs, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("temperature = 2\n")
        assert main(distill_argv(inputs, "--config", str(config))) == 1


class TestDistillCommand:
    def test_outputs_and_snapshot(self, inputs, capsys):
        assert main(distill_argv(inputs, "--corpus", str(inputs["corpus"]), "--max-new", "8")) == 0
        run_dir = inputs["out"] / "distill-seed0"
        printed = [Path(line) for line in capsys.readouterr().out.splitlines()]
        assert printed == [run_dir / "model.ckpt.json", run_dir / "metrics.csv", run_dir / "accuracy.csv"]
        snapshot = parse_config_text((run_dir / "config.snapshot").read_text())
        assert snapshot["mask_kind"] == "salient"
        assert snapshot["output_root_from_env"] == "false"
        assert (run_dir / "corpus.sha256").read_text() == f"{file_sha256(inputs['corpus'])}  corpus.jsonl\n"
        distill_hash = f"{file_sha256(inputs['distill_set'])}  distill_set.jsonl\n"
        assert (run_dir / "distill_set.sha256").read_text() == distill_hash

    def test_flags_override_config_file(self, inputs, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("tau = 3.0\nthreshold-mode = static\n")
        assert main(distill_argv(inputs, "--config", str(config), "--tau", "1.5", "--name", "c")) == 0
        snapshot = parse_config_text((inputs["out"] / "c" / "config.snapshot").read_text())
        assert snapshot["tau"] == "1.5"
        assert snapshot["threshold_mode"] == "static"

    def test_default_root_comes_from_env(self, inputs, tmp_path):
        argv = ["distill", "--teacher", str(inputs["teacher"]), "--distill-set", str(inputs["distill_set"])]
        assert main([*argv, *TINY, *FAST]) == 0
        run_dir = tmp_path / "home" / "runs" / "distill-seed0"
        snapshot = parse_config_text((run_dir / "config.snapshot").read_text())
        assert snapshot["output_root_from_env"] == "true"

    def test_same_seed_same_metrics(self, inputs):
        assert main(distill_argv(inputs, "--name", "a")) == 0
        assert main(distill_argv(inputs, "--name", "b")) == 0
        a, b = inputs["out"] / "a", inputs["out"] / "b"
        assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
        assert (a / "model.ckpt.json").read_bytes() == (b / "model.ckpt.json").read_bytes()
        assert (a / "diagnostics.jsonl").read_bytes() == (b / "diagnostics.jsonl").read_bytes()

    def test_self_distill(self, inputs):
        argv = [
            "self-distill",
            "--model",
            str(inputs["teacher"]),
            "--distill-set",
            str(inputs["distill_set"]),
            "--out-dir",
            str(inputs["out"]),
            *FAST,
        ]
        assert main(argv) == 0
        assert (inputs["out"] / "self-distill-seed0" / "model.ckpt.json").exists()


class TestStudentTraces:
    def test_student_regenerates_the_distill_set(self, inputs, monkeypatch, capsys):
        records = load_corpus(inputs["distill_set"])
        gold = {tuple(r.prompt): r.response[1:] for r in records}
        seen = []

        def student_decoder(model, prompt, max_new, end_token=None):
            seen.append(model.config.n_layers)
            return np.array(gold[tuple(int(t) for t in prompt)])

        monkeypatch.setattr("maskd.distill.teacher.generate", student_decoder)
        assert main(distill_argv(inputs, "--traces", "student", "--name", "s")) == 0
        run_dir = inputs["out"] / "s"
        assert seen == [1] * len(records)
        printed = [Path(line) for line in capsys.readouterr().out.splitlines()]
        assert printed[0] == run_dir / "student_distill_set.jsonl"
        regenerated = load_corpus(run_dir / "student_distill_set.jsonl")
        assert [r.response for r in regenerated] == [r.response for r in records]
        assert parse_config_text((run_dir / "config.snapshot").read_text())["traces"] == "student"

    def test_teacher_traces_are_the_default(self, inputs):
        assert main(distill_argv(inputs, "--name", "t")) == 0
        run_dir = inputs["out"] / "t"
        assert parse_config_text((run_dir / "config.snapshot").read_text())["traces"] == "teacher"
        assert not (run_dir / "student_distill_set.jsonl").exists()

    def test_no_correct_student_trace_is_failure(self, inputs, monkeypatch, capsys):
        monkeypatch.setattr(
            "maskd.distill.teacher.generate", lambda model, prompt, max_new, end_token=None: np.array([END])
        )
        assert main(distill_argv(inputs, "--traces", "student")) == 1
        assert "No correct student traces out of 6 prompts" in capsys.readouterr().err
        assert not (inputs["out"] / "distill-seed0" / "model.ckpt.json").exists()

    def test_unknown_source_in_config_file_is_usage_error(self, inputs, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("traces = oracle\n")
        assert main(distill_argv(inputs, "--config", str(config))) == 2


class TestAblateCommand:
    def test_corpus_and_distill_set_hashed_separately(self, inputs):
        argv = [
            "ablate",
            "--teacher",
            str(inputs["teacher"]),
            "--distill-set",
            str(inputs["distill_set"]),
            "--corpus",
            str(inputs["corpus"]),
            "--out-dir",
            str(inputs["out"]),
            "--max-new",
            "8",
            "--eval-n",
            "2",
            *TINY,
            *FAST,
        ]
        assert main(argv) == 0
        run_dir = inputs["out"] / "ablate-seed0"
        corpus_sha = file_sha256(inputs["corpus"])
        assert (run_dir / "corpus.sha256").read_text() == f"{corpus_sha}  corpus.jsonl\n"
        assert (run_dir / "distill_set.sha256").read_text().split()[0] == file_sha256(inputs["distill_set"])
        with (run_dir / "results.csv").open() as f:
            rows = list(csv.DictReader(f))
        assert rows
        assert {r["corpus_sha256"] for r in rows} == {corpus_sha}


class TestAnalyzeCommand:
    def analyze(self, inputs, *extra: str) -> list[str]:
        return [
            "analyze",
            "--model",
            str(inputs["teacher"]),
            "--teacher",
            str(inputs["teacher"]),
            "--corpus",
            str(inputs["corpus"]),
            "--out-dir",
            str(inputs["out"]),
            "--max-new",
            "8",
            *extra,
        ]

    def test_kl_decay_of_a_model_against_itself(self, inputs):
        assert main(self.analyze(inputs, "--what", "kl-decay", "--k", "4")) == 0
        with (inputs["out"] / "analyze-seed0" / "kl_decay.csv").open() as f:
            rows = list(csv.DictReader(f))
        assert [float(r["mean_kl"]) for r in rows] == [0.0] * 4

    def test_all_writes_four_tables(self, inputs, capsys):
        assert main(self.analyze(inputs)) == 0
        run_dir = inputs["out"] / "analyze-seed0"
        printed = [Path(line) for line in capsys.readouterr().out.splitlines()]
        names = ["curve.csv", "kl_decay.csv", "map.csv", "accuracy.csv"]
        assert printed == [run_dir / n for n in names]
        assert all(p.exists() for p in printed)

    def test_histogram_from_a_run(self, inputs):
        assert main(distill_argv(inputs, "--name", "d")) == 0
        argv = ["analyze", "--what", "histogram", "--run", str(inputs["out"] / "d"), "--out-dir", str(inputs["out"])]
        assert main(argv) == 0
        header = (inputs["out"] / "analyze-seed0" / "histogram.csv").read_text().splitlines()[0]
        assert header == "distance,count"

    def test_kl_decay_takes_tau_from_the_run(self, inputs):
        assert main(distill_argv(inputs, "--name", "d", "--tau", "1.5")) == 0
        run_dir = inputs["out"] / "d"
        student = str(run_dir / "model.ckpt.json")

        def kl_decay(name: str, *extra: str) -> bytes:
            argv = self.analyze(inputs, "--what", "kl-decay", "--k", "4", "--model", student, "--name", name, *extra)
            assert main(argv) == 0
            return (inputs["out"] / name / "kl_decay.csv").read_bytes()

        from_run = kl_decay("from-run", "--run", str(run_dir))
        assert from_run == kl_decay("explicit", "--tau", "1.5")
        assert from_run != kl_decay("unit", "--tau", "1.0")
        assert parse_config_text((inputs["out"] / "from-run" / "config.snapshot").read_text())["tau"] == "1.5"

    def test_tau_defaults_to_one_without_a_run(self, inputs):
        assert main(self.analyze(inputs, "--what", "kl-decay", "--k", "4")) == 0
        snapshot = parse_config_text((inputs["out"] / "analyze-seed0" / "config.snapshot").read_text())
        assert snapshot["tau"] == "1.0"

    def test_non_positive_tau_is_failure(self, inputs, capsys):
        assert main(self.analyze(inputs, "--what", "kl-decay", "--tau", "0")) == 1
        assert "tau > 0" in capsys.readouterr().err

    def test_kl_decay_needs_a_teacher(self, inputs):
        argv = ["analyze", "--what", "kl-decay", "--model", str(inputs["teacher"]), "--corpus", str(inputs["corpus"])]
        assert main(argv) == 2
