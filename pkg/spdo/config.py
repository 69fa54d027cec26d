from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib  # type: ignore[import-not-found]  # Python < 3.11 fallback

from .errors import SpdoConfigError
from .kernels import WENDLAND_PROFILES
from .operators import SYMBOL_NAMES

log = logging.getLogger("spdo.config")

METHODS = ("galerkin", "collocation")
FORMATS = ("csv", "markdown")
DEFAULT_LADDER = [20, 30, 40, 51, 101, 200, 500]
AUTO_TABLE = 800
STUDY_N = 3  # studies run on S^2


def _load_toml(path: Path) -> dict:
    if not path.exists():
        raise SpdoConfigError(f"No config found at {path}. Copy config.example.toml there, or pass --config <path>.")
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise SpdoConfigError(f"{path}: invalid TOML — {e}") from e


def _clamp(value: float, lo: float, hi: float, name: str, default: float) -> float:
    if lo <= value <= hi:
        return value
    log.warning("%s=%.4g out of range [%.4g, %.4g]; using %.4g.", name, value, lo, hi, default)
    return default


def _merge_dataclass(instance: Any, overrides: dict) -> None:
    """Recursively merge a dict of overrides into a dataclass instance."""
    for key, value in overrides.items():
        if not hasattr(instance, key):
            continue
        current = getattr(instance, key)
        if isinstance(value, dict) and hasattr(current, "__dataclass_fields__"):
            _merge_dataclass(current, value)
        else:
            setattr(instance, key, value)


def normalize_operator(name: str) -> str:
    """``weakly-singular`` and ``weakly_singular`` name the same operator."""
    return name.strip().lower().replace("-", "_")


def kernel_tau(kernel: str, n: int = STUDY_N) -> float:
    _, extra = WENDLAND_PROFILES[kernel]
    return n / 2 + extra


# ── Nested config sections ──────────────────────────────


@dataclass
class StudySection:
    method: str = "galerkin"
    operator: str = "weakly_singular"
    operator_expression: str = ""
    operator_order: float = 0.0
    kernel: str = "wendland"
    norm: float = -0.5
    ladder: list[int] = field(default_factory=lambda: list(DEFAULT_LADDER))
    lmax: int = 400
    points: str = "fibonacci"
    seed: int = 0
    shape_table: int = 0

    def __post_init__(self) -> None:
        self.operator = normalize_operator(self.operator)
        self.method = self.method.strip().lower()
        self.ladder = [int(x) for x in self.ladder]
        self.lmax = max(0, int(self.lmax))
        self.shape_table = max(0, int(self.shape_table))

    @property
    def auto_lmax(self) -> bool:
        return self.lmax == 0

    @property
    def table_size(self) -> int:
        """Shape coefficient table length; 0 in the file means twice lmax (AUTO_TABLE with lmax = 0)."""
        if self.shape_table:
            return max(self.shape_table, self.lmax)
        return 2 * self.lmax if self.lmax else AUTO_TABLE


@dataclass
class SolverSection:
    tolerance: float = 1e-4
    threads: int = 1
    parallel: bool = False

    def __post_init__(self) -> None:
        self.tolerance = _clamp(float(self.tolerance), 0.0, 1.0, "tolerance", 1e-4)
        env = os.environ.get("SPDO_THREADS")
        if env:
            try:
                self.threads = int(env)
            except ValueError:
                log.warning("SPDO_THREADS=%r is not an integer; ignoring.", env)
        self.threads = max(1, int(self.threads))


@dataclass
class OutputSection:
    path: str = ""
    format: str = "csv"

    def __post_init__(self) -> None:
        self.format = self.format.strip().lower()


@dataclass
class Config:
    """Study configuration loaded from study.toml; SPDO_THREADS overrides solver.threads."""

    study: StudySection = field(default_factory=StudySection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)

    out_dir: Path = field(default_factory=Path)

    @classmethod
    def from_file(cls, path: Path, *, out_dir: Path) -> "Config":
        """Load configuration from a TOML file. Raises SpdoConfigError on parse errors."""
        raw = _load_toml(path)
        config = cls(out_dir=out_dir)
        _merge_dataclass(config, raw)

        config.study.__post_init__()
        config.solver.__post_init__()
        config.output.__post_init__()
        return config

    @property
    def report_path(self) -> Path:
        if self.output.path:
            return Path(self.output.path)
        suffix = ".md" if self.output.format == "markdown" else ".csv"
        return self.out_dir / f"{self.study.method}{suffix}"

    def validate(self) -> None:
        """Check names and ranges. Raises SpdoConfigError."""
        s = self.study
        if s.method not in METHODS:
            raise SpdoConfigError(f"Unknown study.method '{s.method}'. Use one of: {', '.join(METHODS)}.")
        if s.operator not in SYMBOL_NAMES:
            raise SpdoConfigError(
                f"Unknown study.operator '{s.operator}'. Use one of: {', '.join(SYMBOL_NAMES)}."
            )
        if s.operator == "custom" and not s.operator_expression:
            raise SpdoConfigError(
                "study.operator = 'custom' needs study.operator_expression (e.g. 'l*(l+1)/(2*l+1)') "
                "and study.operator_order."
            )
        if s.kernel not in WENDLAND_PROFILES:
            raise SpdoConfigError(
                f"Unknown study.kernel '{s.kernel}'. Use one of: {', '.join(WENDLAND_PROFILES)}."
            )
        if self.output.format not in FORMATS:
            raise SpdoConfigError(f"Unknown output.format '{self.output.format}'. Use one of: {', '.join(FORMATS)}.")
        if not s.ladder or any(N < 2 for N in s.ladder):
            raise SpdoConfigError("study.ladder needs point counts N >= 2, e.g. [20, 40, 80].")
        if any(b <= a for a, b in zip(s.ladder, s.ladder[1:])):
            raise SpdoConfigError(f"study.ladder must be strictly increasing, got {s.ladder}.")
        if not (s.points == "fibonacci" or s.points.startswith("file:")):
            raise SpdoConfigError(
                f"study.points = '{s.points}' is not understood. Use 'fibonacci' or 'file:PATH' ({{N}} expands)."
            )
        bound = 2.0 * kernel_tau(s.kernel) + (1 - STUDY_N) / 2
        if s.norm >= bound:
            raise SpdoConfigError(
                f"study.norm = {s.norm:g} is too large for kernel '{s.kernel}': "
                f"the approximations lie in H^s only for s < {bound:g}."
            )


def load_config(path: Path, *, out_dir: Path, required: bool) -> Config:
    """Config from ``path``, or defaults when the file is absent and not ``required``."""
    if path.is_file() or required:
        return Config.from_file(path, out_dir=out_dir)
    log.debug("No config at %s; using defaults.", path)
    return Config(out_dir=out_dir)
