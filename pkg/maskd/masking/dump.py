"""Mask dump: one CSV row per response position with its budget and selection."""

from __future__ import annotations

import csv
from pathlib import Path

from maskd.masking.selection import SalientSelection

MASK_DUMP_COLUMNS = ("position", "rho", "achieved_mass", "masked_positions")


def write_mask_dump(selection: SalientSelection, path: Path) -> Path:
    """Write ``selection`` as CSV; masked positions are space-separated."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MASK_DUMP_COLUMNS)
        for entry in selection.entries:
            writer.writerow(
                [entry.position, repr(entry.rho), repr(entry.achieved_mass), " ".join(str(j) for j in entry.masked)]
            )
    return path
