"""CLI entry point for maskd.

Usage:
    python -m maskd gen-corpus --n 10000 --seed 0 --out data/corpus.jsonl
    python -m maskd distill --teacher runs/teacher/model.ckpt.json --distill-set runs/teacher/distill_set.jsonl
"""

from maskd.cli import main as run
from maskd.logs import configure_logging


def main() -> int:
    """Entry point for `python -m maskd` and the `maskd` script."""
    configure_logging()
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
