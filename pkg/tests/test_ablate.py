"""Tests for ablation grids, cell failures and the results tables."""

import csv

import pytest

from conftest import make_records, tiny_config
from maskd.ablate import (
    RESULT_COLUMNS,
    SUMMARY_COLUMNS,
    AblationGrid,
    cell_name,
    parse_list,
    parse_mask_axis,
    parse_rho_ranges,
    parse_seeds,
    run_ablation,
)
from maskd.distill import DistillConfig
from maskd.model import build_model
from maskd.types import ConfigError

SHA = "0" * 64


def read_rows(path):
    with path.open() as f:
        return list(csv.DictReader(f))


@pytest.fixture
def sweep(tmp_path):
    """Run a grid on tiny models and return the parsed results and summary."""

    def run(grid: AblationGrid, workers: int = 1, name: str = "sweep"):
        results, summary = run_ablation(
            DistillConfig(epochs=1, batch_size=4, diag_interval=1),
            grid,
            build_model(tiny_config(seed=1)).freeze(),
            tiny_config(n_layers=1),
            make_records(4),
            make_records(2, seed=9, split="eval"),
            tmp_path / name,
            SHA,
            max_new=16,
            workers=workers,
        )
        return results, summary

    return run


class TestParsers:
    def test_list(self):
        assert parse_list(" a, b ,,c") == ("a", "b", "c")
        with pytest.raises(ConfigError):
            parse_list(" , ")

    def test_mask_aliases(self):
        assert parse_mask_axis("response,visual,question,none") == (
            "salient",
            "region_visual",
            "region_question",
            "causal_only",
        )
        assert parse_mask_axis("salient") == ("salient",)

    def test_rho_ranges(self):
        assert parse_rho_ranges("0.1:0.3,0.3:0.5") == ((0.1, 0.3), (0.3, 0.5))
        assert parse_rho_ranges("0.4") == ((0.4, 0.4),)
        with pytest.raises(ConfigError):
            parse_rho_ranges("low:high")

    def test_seeds(self):
        assert parse_seeds("0,1,2") == (0, 1, 2)
        with pytest.raises(ConfigError):
            parse_seeds("0,x")


class TestAblationGrid:
    def test_length_is_product_of_axes(self):
        grid = AblationGrid(
            mask_kinds=("salient", "causal_only"),
            strategies=("high_attention", "random", "low_attention"),
            rho_ranges=((0.1, 0.3), (0.3, 0.5)),
            seeds=(0, 1),
        )
        assert len(grid) == 2 * 3 * 1 * 2 * 2

    def test_cell_names_are_unique(self):
        grid = AblationGrid(rho_ranges=((0.1, 0.3), (0.3, 0.5)), seeds=(0, 1))
        assert len({cell_name(*c) for c in grid.cells()}) == len(grid)
        assert cell_name("salient", "random", "static", (0.3, 0.5), 2) == "salient-random-static-rho0.3_0.5-seed2"


class TestRunAblation:
    def test_single_cell(self, sweep, tmp_path):
        results, summary = sweep(AblationGrid())
        (row,) = read_rows(results)
        assert row["status"] == "ok"
        assert 0.0 <= float(row["accuracy"]) <= 1.0
        assert 0.0 <= float(row["visual_ratio"]) <= 1.0
        assert (tmp_path / "sweep" / "cells" / row["cell"] / "metrics.csv").exists()
        assert results.read_text().splitlines()[0] == ",".join(RESULT_COLUMNS)
        assert summary.read_text().splitlines()[0] == ",".join(SUMMARY_COLUMNS)

    def test_rows_and_summary(self, sweep):
        grid = AblationGrid(mask_kinds=("salient", "region_visual", "causal_only"), seeds=(0, 1))
        results, summary = sweep(grid)
        rows = read_rows(results)
        assert len(rows) == 6
        assert {r["corpus_sha256"] for r in rows} == {SHA}
        assert [r["mask_kind"] for r in rows] == ["salient"] * 2 + ["region_visual"] * 2 + ["causal_only"] * 2
        groups = read_rows(summary)
        assert len(groups) == 3
        assert all(g["n_ok"] == "2" for g in groups)

    def test_failing_cell_is_recorded(self, sweep):
        grid = AblationGrid(strategies=("high_attention", "loudest"), rho_ranges=((0.3, 0.5), (0.6, 0.4)))
        results, summary = sweep(grid)
        rows = read_rows(results)
        assert [r["status"] for r in rows] == ["ok", "failed", "failed", "failed"]
        assert "ConfigError" in rows[1]["error"]
        assert rows[1]["accuracy"] == ""
        assert "ValidationError" in rows[2]["error"]
        assert [g["n_failed"] for g in read_rows(summary)] == ["0", "1", "1", "1"]

    def test_workers_do_not_change_results(self, sweep):
        grid = AblationGrid(mask_kinds=("salient", "causal_only"), seeds=(0, 1))
        a, _ = sweep(grid, workers=1, name="one")
        b, _ = sweep(grid, workers=2, name="two")
        assert a.read_bytes() == b.read_bytes()
