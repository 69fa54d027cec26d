"""Resolve config and output paths for spdo runs.

Resolution order (highest precedence wins):
1. Explicit ``--config`` and ``--out-dir`` overrides passed by the CLI layer.
2. ``SPDO_HOME`` environment variable -> ``$SPDO_HOME/study.toml``
   and ``$SPDO_HOME/results/``.
3. Default: ``./spdo.toml`` and ``./results/`` in the working directory.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class ResolvedPaths:
    """The resolved on-disk locations for one spdo invocation."""

    home: Path | None
    config_path: Path
    out_dir: Path
    config_explicit: bool = False


def _home_root() -> Path | None:
    env = os.environ.get("SPDO_HOME")
    if env:
        return Path(env).expanduser()
    return None


def resolve_paths(
    config_override: Path | None = None,
    out_dir_override: Path | None = None,
) -> ResolvedPaths:
    """Return the ResolvedPaths for this invocation."""
    home = _home_root()
    if home is not None:
        default_config, default_out = home / "study.toml", home / "results"
    else:
        default_config, default_out = Path.cwd() / "spdo.toml", Path.cwd() / "results"
    return ResolvedPaths(
        home=home,
        config_path=config_override if config_override is not None else default_config,
        out_dir=out_dir_override if out_dir_override is not None else default_out,
        config_explicit=config_override is not None,
    )


def ensure_out_dir(paths: ResolvedPaths) -> None:
    """Create the output directory if missing."""
    paths.out_dir.mkdir(parents=True, exist_ok=True)
