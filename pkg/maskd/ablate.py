"""Ablation sweeps over masking configurations.

Every cell of mask_kind x selection_strategy x threshold_mode x rho-range x
seed is one distillation run in its own directory, followed by an
evaluation of answer accuracy and visual-attention ratio. A failing cell is
recorded in the results table and the sweep moves on.
"""

from __future__ import annotations

import csv
import itertools
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import logfire
from pydantic import ValidationError

from maskd.analysis.accuracy import answer_accuracy
from maskd.analysis.attention import visual_attention_curve
from maskd.corpus.records import CorpusRecord
from maskd.distill.config import DistillConfig
from maskd.distill.run import run_training
from maskd.model.config import ModelConfig
from maskd.model.transformer import Model, build_model
from maskd.types import ConfigError, MaskdError

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"

RESULT_COLUMNS = (
    "cell",
    "mask_kind",
    "selection_strategy",
    "threshold_mode",
    "rho_min",
    "rho_max",
    "seed",
    "corpus_sha256",
    "status",
    "accuracy",
    "visual_ratio",
    "error",
)
SUMMARY_COLUMNS = (
    "cell",
    "mask_kind",
    "selection_strategy",
    "threshold_mode",
    "rho_min",
    "rho_max",
    "n_ok",
    "n_failed",
    "accuracy_mean",
    "accuracy_std",
    "visual_ratio_mean",
    "visual_ratio_std",
)

# Region names accepted on the mask axis besides the mask kinds themselves
MASK_ALIASES = {"response": "salient", "visual": "region_visual", "question": "region_question", "none": "causal_only"}


@dataclass(frozen=True)
class AblationGrid:
    mask_kinds: tuple[str, ...] = ("salient",)
    strategies: tuple[str, ...] = ("high_attention",)
    threshold_modes: tuple[str, ...] = ("self_paced",)
    rho_ranges: tuple[tuple[float, float], ...] = ((0.3, 0.5),)
    seeds: tuple[int, ...] = (0,)

    def cells(self) -> list[tuple[str, str, str, tuple[float, float], int]]:
        axes = (self.mask_kinds, self.strategies, self.threshold_modes, self.rho_ranges, self.seeds)
        return list(itertools.product(*axes))

    def __len__(self) -> int:
        return len(self.cells())


def parse_list(text: str) -> tuple[str, ...]:
    items = tuple(item.strip() for item in text.split(",") if item.strip())
    if not items:
        raise ConfigError(f"empty axis {text!r}")
    return items


def parse_mask_axis(text: str) -> tuple[str, ...]:
    return tuple(MASK_ALIASES.get(item, item) for item in parse_list(text))


def parse_rho_ranges(text: str) -> tuple[tuple[float, float], ...]:
    """``0.1:0.3,0.3:0.5`` -> ((0.1, 0.3), (0.3, 0.5))."""
    ranges = []
    for item in parse_list(text):
        lo, sep, hi = item.partition(":")
        try:
            ranges.append((float(lo), float(hi if sep else lo)))
        except ValueError:
            raise ConfigError(f"rho range {item!r} is not 'min:max'") from None
    return tuple(ranges)


def parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in parse_list(text))
    except ValueError:
        raise ConfigError(f"seeds {text!r} are not integers") from None


@dataclass
class CellResult:
    cell: str
    mask_kind: str
    selection_strategy: str
    threshold_mode: str
    rho_min: float
    rho_max: float
    seed: int
    corpus_sha256: str
    status: str = "ok"
    accuracy: float | None = None
    visual_ratio: float | None = None
    error: str = ""

    @property
    def group(self) -> tuple[str, str, str, float, float]:
        return (self.mask_kind, self.selection_strategy, self.threshold_mode, self.rho_min, self.rho_max)

    def row(self) -> list[object]:
        def num(x: float | None) -> str:
            return "" if x is None else repr(float(x))

        return [
            self.cell,
            self.mask_kind,
            self.selection_strategy,
            self.threshold_mode,
            self.rho_min,
            self.rho_max,
            self.seed,
            self.corpus_sha256,
            self.status,
            num(self.accuracy),
            num(self.visual_ratio),
            self.error,
        ]


def cell_name(mask_kind: str, strategy: str, mode: str, rho: tuple[float, float], seed: int) -> str:
    return f"{mask_kind}-{strategy}-{mode}-rho{rho[0]:g}_{rho[1]:g}-seed{seed}"


def run_cell(
    base: DistillConfig,
    cell: tuple[str, str, str, tuple[float, float], int],
    teacher: Model,
    student_config: ModelConfig,
    distill_set: list[CorpusRecord],
    eval_set: list[CorpusRecord],
    root: Path,
    corpus_sha256: str,
    max_new: int,
    progress: bool = False,
) -> CellResult:
    """Train and evaluate one cell; a config, maskd or I/O error marks the cell failed."""
    mask_kind, strategy, mode, rho, seed = cell
    name = cell_name(*cell)
    result = CellResult(name, mask_kind, strategy, mode, rho[0], rho[1], seed, corpus_sha256)
    try:
        with logfire.span("ablation cell {cell}", cell=name):
            cfg = DistillConfig(
                **(
                    base.model_dump()
                    | {
                        "mask_kind": mask_kind,
                        "selection_strategy": strategy,
                        "threshold_mode": mode,
                        "rho_min": rho[0],
                        "rho_max": rho[1],
                        "seed": seed,
                    }
                )
            )
            student = build_model(student_config.model_copy(update={"seed": seed}))
            run = run_training(cfg, teacher.clone(), student, distill_set, root / name, progress=progress)
            result.accuracy = answer_accuracy(run.model, eval_set, max_new).fraction
            result.visual_ratio = visual_attention_curve(run.model, eval_set).mean
    except (MaskdError, OSError, ValidationError) as e:
        result.status = "failed"
        result.error = f"{type(e).__name__}: {e}"
        logger.warning(f"Ablation cell {name} failed: {result.error}")
    return result


def summarize(results: list[CellResult]) -> list[list[object]]:
    """Mean and population standard deviation per cell across seeds (ok cells only)."""
    groups: dict[tuple[str, str, str, float, float], list[CellResult]] = {}
    for r in results:
        groups.setdefault(r.group, []).append(r)

    def stats(values: list[float]) -> tuple[str, str]:
        if not values:
            return "", ""
        return repr(statistics.fmean(values)), repr(statistics.pstdev(values))

    rows = []
    for (mask_kind, strategy, mode, lo, hi), members in groups.items():
        ok = [m for m in members if m.status == "ok"]
        acc = stats([m.accuracy for m in ok if m.accuracy is not None])
        vis = stats([m.visual_ratio for m in ok if m.visual_ratio is not None])
        name = f"{mask_kind}-{strategy}-{mode}-rho{lo:g}_{hi:g}"
        rows.append([name, mask_kind, strategy, mode, lo, hi, len(ok), len(members) - len(ok), *acc, *vis])
    return rows


def _write_csv(path: Path, header: tuple[str, ...], rows: list[list[object]]) -> Path:
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def run_ablation(
    base: DistillConfig,
    grid: AblationGrid,
    teacher: Model,
    student_config: ModelConfig,
    distill_set: list[CorpusRecord],
    eval_set: list[CorpusRecord],
    run_dir: Path,
    corpus_sha256: str,
    max_new: int = 64,
    workers: int = 1,
    progress: bool = False,
) -> tuple[Path, Path]:
    """Run every cell and write results.csv and summary.csv under ``run_dir``.

    Cells run on ``workers`` threads, each in a disjoint directory; rows are
    written in grid order regardless of completion order.
    """
    cells = grid.cells()
    root = run_dir / "cells"
    logger.info(f"Ablation over {len(cells)} cells with {workers} worker(s)")

    def work(cell: tuple[str, str, str, tuple[float, float], int]) -> CellResult:
        show = progress and workers == 1
        return run_cell(base, cell, teacher, student_config, distill_set, eval_set, root, corpus_sha256, max_new, show)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(cell) for cell in cells]

    failed = sum(r.status != "ok" for r in results)
    if failed:
        logger.warning(f"{failed}/{len(results)} ablation cells failed")
    results_path = _write_csv(run_dir / RESULTS_FILE, RESULT_COLUMNS, [r.row() for r in results])
    summary_path = _write_csv(run_dir / SUMMARY_FILE, SUMMARY_COLUMNS, summarize(results))
    return results_path, summary_path
