"""Tests for config files, precedence, run directories and provenance."""

import pytest

from maskd.corpus import file_sha256
from maskd.runs import (
    CORPUS_HASH_FILE,
    DISTILL_SET_HASH_FILE,
    SNAPSHOT_FILE,
    output_root,
    parse_config_text,
    prepare_run_dir,
    render_snapshot,
    resolve_config,
    write_provenance,
)
from maskd.types import ConfigError


class TestParseConfigText:
    def test_comments_blanks_and_dashes(self):
        text = "# distillation\n\ntau = 1.5   # warmer\nrho-min=0.2\n"
        assert parse_config_text(text) == {"tau": "1.5", "rho_min": "0.2"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="run.cfg:2"):
            parse_config_text("tau = 1\nepochs 3\n", "run.cfg")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("tau = 1\ntau = 2\n")

    def test_empty_value_is_kept(self):
        assert parse_config_text("name =\n") == {"name": ""}


class TestResolveConfig:
    defaults = {"tau": 2.0, "epochs": 2, "name": None}

    def test_flags_beat_file_beat_defaults(self):
        resolved = resolve_config(self.defaults, {"tau": "3.0", "epochs": "4"}, {"tau": 1.5, "epochs": None})
        assert resolved == {"tau": 1.5, "epochs": "4", "name": None}

    def test_unknown_file_key(self):
        with pytest.raises(ConfigError, match="temperature"):
            resolve_config(self.defaults, {"temperature": "1"}, {})


class TestSnapshot:
    def test_sorted_and_rendered(self):
        text = render_snapshot({"tau": 1.5, "dump_masks": False, "epochs": 2})
        assert text == "dump_masks = false\nepochs = 2\ntau = 1.5\n"

    def test_snapshot_parses_back(self):
        values = {"tau": 1.5, "aux_weight_shared": True, "name": "run"}
        assert parse_config_text(render_snapshot(values)) == {"tau": "1.5", "aux_weight_shared": "true", "name": "run"}

    def test_provenance_files(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("# header\n")
        run_dir = prepare_run_dir(tmp_path / "runs", "r", force=False)
        write_provenance(run_dir, {"tau": 2.0}, tmp_path / "runs", False, corpus)
        snapshot = parse_config_text((run_dir / SNAPSHOT_FILE).read_text())
        assert snapshot["output_root"] == str(tmp_path / "runs")
        assert snapshot["output_root_from_env"] == "false"
        assert (run_dir / CORPUS_HASH_FILE).read_text() == f"{file_sha256(corpus)}  c.jsonl\n"
        assert not (run_dir / DISTILL_SET_HASH_FILE).exists()

    def test_distill_set_hashed_apart_from_corpus(self, tmp_path):
        corpus, distill_set = tmp_path / "c.jsonl", tmp_path / "d.jsonl"
        corpus.write_text("# corpus\n")
        distill_set.write_text("# distill set\n")
        run_dir = prepare_run_dir(tmp_path / "runs", "r", force=False)
        write_provenance(run_dir, {}, tmp_path / "runs", False, corpus, distill_set)
        assert (run_dir / CORPUS_HASH_FILE).read_text() == f"{file_sha256(corpus)}  c.jsonl\n"
        assert (run_dir / DISTILL_SET_HASH_FILE).read_text() == f"{file_sha256(distill_set)}  d.jsonl\n"

    def test_no_corpus_writes_no_corpus_hash(self, tmp_path):
        distill_set = tmp_path / "d.jsonl"
        distill_set.write_text("# distill set\n")
        run_dir = prepare_run_dir(tmp_path / "runs", "r", force=False)
        write_provenance(run_dir, {}, tmp_path / "runs", False, None, distill_set)
        assert not (run_dir / CORPUS_HASH_FILE).exists()
        assert (run_dir / DISTILL_SET_HASH_FILE).exists()


class TestRunDirectories:
    def test_refuses_nonempty_without_force(self, tmp_path):
        run_dir = prepare_run_dir(tmp_path, "r", force=False)
        (run_dir / "metrics.csv").write_text("x\n")
        with pytest.raises(ConfigError, match="--force"):
            prepare_run_dir(tmp_path, "r", force=False)

    def test_force_clears(self, tmp_path):
        run_dir = prepare_run_dir(tmp_path, "r", force=False)
        (run_dir / "stale.csv").write_text("x\n")
        assert not any(prepare_run_dir(tmp_path, "r", force=True).iterdir())

    def test_empty_directory_is_reused(self, tmp_path):
        (tmp_path / "r").mkdir()
        assert prepare_run_dir(tmp_path, "r", force=False) == tmp_path / "r"

    def test_output_root(self, tmp_path):
        assert output_root(tmp_path) == (tmp_path, False)
        root, from_env = output_root(None)
        assert root == tmp_path / "home" / "runs"
        assert from_env
