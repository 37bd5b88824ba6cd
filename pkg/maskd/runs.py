"""Run directories, config files and provenance snapshots.

Config files are line-oriented ``key = value`` text; ``#`` starts a comment
and blank lines are ignored. Values resolve as flags > file > defaults, and
the resolved set is written back as ``config.snapshot`` in the same format.
"""

from __future__ import annotations

import logging
import shutil
from collections.abc import Mapping
from pathlib import Path

from maskd.corpus.records import file_sha256
from maskd.paths import get_runs_root, home_from_env
from maskd.types import ConfigError

logger = logging.getLogger(__name__)

SNAPSHOT_FILE = "config.snapshot"
CORPUS_HASH_FILE = "corpus.sha256"
DISTILL_SET_HASH_FILE = "distill_set.sha256"


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines.

    Raises:
        ConfigError: If a line has no ``=`` or an empty key, or a key repeats
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def parse_config_file(path: Path) -> dict[str, str]:
    return parse_config_text(path.read_text(), str(path))


def resolve_config(
    defaults: Mapping[str, object],
    file_values: Mapping[str, object],
    flag_values: Mapping[str, object | None],
) -> dict[str, object]:
    """Merge with precedence flags > file > defaults; unset flags are None.

    Raises:
        ConfigError: If the file names a key the command does not know
    """
    unknown = sorted(set(file_values) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    resolved = dict(defaults)
    resolved.update(file_values)
    resolved.update({k: v for k, v in flag_values.items() if v is not None})
    return resolved


def _render(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def render_snapshot(values: Mapping[str, object]) -> str:
    return "".join(f"{key} = {_render(values[key])}\n" for key in sorted(values))


def output_root(out_dir: Path | None) -> tuple[Path, bool]:
    """The root runs are written under, and whether it came from MASKD_HOME."""
    if out_dir is not None:
        return out_dir, False
    return get_runs_root(), home_from_env()


def prepare_run_dir(root: Path, name: str, force: bool) -> Path:
    """Create ``root/name``, refusing to reuse a nonempty directory unless forced.

    Raises:
        ConfigError: If the run directory exists and is nonempty without force
    """
    run_dir = root / name
    if run_dir.exists() and any(run_dir.iterdir()):
        if not force:
            raise ConfigError(f"run directory {run_dir} already exists (use --force to overwrite)")
        logger.info(f"Overwriting run directory {run_dir}")
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def write_provenance(
    run_dir: Path,
    values: Mapping[str, object],
    root: Path,
    from_env: bool,
    corpus: Path | None,
    distill_set: Path | None = None,
) -> None:
    """Write config.snapshot (resolved values plus output root) and the hash of each input file given."""
    snapshot = dict(values)
    snapshot["output_root"] = root
    snapshot["output_root_from_env"] = from_env
    (run_dir / SNAPSHOT_FILE).write_text(render_snapshot(snapshot))
    for name, path in ((CORPUS_HASH_FILE, corpus), (DISTILL_SET_HASH_FILE, distill_set)):
        if path is not None:
            (run_dir / name).write_text(f"{file_sha256(path)}  {path.name}\n")
