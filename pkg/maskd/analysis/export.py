"""CSV files for every analysis, each with a header row."""

from __future__ import annotations

import csv
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from maskd.analysis.accuracy import AccuracyResult
from maskd.analysis.attention import AttentionCurve, SalientMassCurve
from maskd.analysis.decay import IntervalKLProfile


def _write(path: Path, header: tuple[str, ...], rows: Iterable[Iterable[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _num(x: float) -> str:
    return repr(float(x))


def write_curve_csv(curve: AttentionCurve, path: Path) -> Path:
    rows = ((n + 1, _num(f), int(c)) for n, (f, c) in enumerate(zip(curve.fractions, curve.counts, strict=True)))
    return _write(path, ("position", "fraction", "n"), rows)


def write_profile_csv(profile: IntervalKLProfile, path: Path) -> Path:
    rows = ((i, _num(m), int(c)) for i, (m, c) in enumerate(zip(profile.means, profile.counts, strict=True)))
    return _write(path, ("interval", "mean_kl", "n"), rows)


def write_histogram_csv(histogram: dict[int, int], path: Path) -> Path:
    return _write(path, ("distance", "count"), sorted(histogram.items()))


def write_map_csv(values: np.ndarray, path: Path) -> Path:
    return _write(path, ("visual_position", "mean_attention"), ((j, _num(v)) for j, v in enumerate(values)))


def write_accuracy_csv(results: list[AccuracyResult], path: Path) -> Path:
    rows = ((r.split, r.n, r.correct, _num(r.fraction)) for r in results)
    return _write(path, ("split", "n", "correct", "fraction"), rows)


def write_mass_curve_csv(curve: SalientMassCurve, path: Path) -> Path:
    rows = ((k + 1, _num(m), int(c)) for k, (m, c) in enumerate(zip(curve.mass, curve.counts, strict=True)))
    return _write(path, ("k", "mean_mass", "n"), rows)
