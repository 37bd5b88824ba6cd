"""Schedule dump: (position, r_n, rho_n) per response position."""

from __future__ import annotations

import csv
from pathlib import Path

from maskd.budget.divergence import DivergenceTrace
from maskd.budget.schedule import BudgetSchedule
from maskd.types import DimensionError

SCHEDULE_DUMP_COLUMNS = ("position", "r", "rho")


def write_schedule_dump(trace: DivergenceTrace, schedule: BudgetSchedule, start: int, path: Path) -> Path:
    """Write one row per response position; ``start`` is the absolute position of the first row."""
    if len(trace) != len(schedule):
        raise DimensionError("write_schedule_dump", (len(trace),), (len(schedule),))
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SCHEDULE_DUMP_COLUMNS)
        for offset, (r, rho) in enumerate(zip(trace.r, schedule.rho, strict=True)):
            writer.writerow([start + offset, repr(float(r)), repr(float(rho))])
    return path
