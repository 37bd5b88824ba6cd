"""Distance between each decoding position and the prefixes masked for it."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterable
from pathlib import Path

from maskd.distill.diagnostics import StepDiagnostics


def load_diagnostics(path: Path) -> list[StepDiagnostics]:
    with path.open() as f:
        return [StepDiagnostics.model_validate_json(line) for line in f if line.strip()]


def masked_distance_histogram(diagnostics: Iterable[StepDiagnostics]) -> dict[int, int]:
    """Counts per distance, ascending; empty when nothing was masked."""
    counts = Counter(d for diag in diagnostics for d in diag.distances)
    return dict(sorted(counts.items()))
