"""Centralized path management for maskd.

Uses the MASKD_HOME environment variable with ~/.maskd default.
"""

import os
from pathlib import Path


def get_maskd_home() -> Path:
    """Get the maskd home directory.

    Priority:
    1. MASKD_HOME env var (explicit override)
    2. ~/.maskd (default)
    """
    if env_home := os.environ.get("MASKD_HOME"):
        return Path(env_home)
    return Path.home() / ".maskd"


def home_from_env() -> bool:
    """Whether the output root came from MASKD_HOME (recorded in run snapshots)."""
    return bool(os.environ.get("MASKD_HOME"))


def get_runs_root() -> Path:
    """Default parent directory for run directories."""
    return get_maskd_home() / "runs"
