"""Experiment configuration and its YAML form.

Defines the ExperimentConfig dataclass and load_config()/dump_config() for
YAML files. Every experiment is deterministic given its config: point sets
and the optimizer start are fixed, so there is no seed. Unknown keys are
rejected so that a typo can never silently fall back to a default.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import List

import yaml

from .baselines import ORACLE_CHOICES
from .errors import ConfigError
from .marginalize import MIN_GRID_POINTS
from .projection import MIN_PARTITIONS
from .spec_utils import MethodSpec, parse_method, parse_target_spec
from .targets import region_from_bounds

DEFAULT_STUDY_POINTS = [64, 128, 256, 512, 1024]


@dataclass
class ExperimentConfig:
    """One marginalization run (or convergence study) on one target."""
    target: str = "skewed:shapes=1,2,3,4,5"
    method: str = "cx3"
    points: int = 512
    alpha: int | None = 19
    extensible: bool = True
    thin: int = 0
    grid_n: int = 4
    partitions: int = 15
    region_sd: float = 3.0
    region: List[float] | None = None
    oracle: str = "auto"
    dense_n: int = 9
    metric_grid: int = 1001
    output: str = "results"
    study_points: List[int] = field(default_factory=lambda: list(DEFAULT_STUDY_POINTS))
    study_methods: List[str] = field(default_factory=lambda: ["qa", "cx3"])

    @property
    def method_spec(self) -> MethodSpec:
        return parse_method(self.method)

    def validate(self) -> "ExperimentConfig":
        """Check ranges and parse every spec string; returns self."""
        if self.partitions < MIN_PARTITIONS:
            raise ConfigError(
                f"partitions must be at least {MIN_PARTITIONS} (quadratic fit), "
                f"got {self.partitions}"
            )
        if self.points < 2:
            raise ConfigError(f"points must be at least 2, got {self.points}")
        if self.alpha is not None and not 1 <= self.alpha <= self.points - 1:
            raise ConfigError(f"alpha must lie in [1, {self.points - 1}], got {self.alpha}")
        if self.thin < 0:
            raise ConfigError(f"thin must be non-negative, got {self.thin}")
        if self.points % (2**self.thin):
            raise ConfigError(f"points = {self.points} is not divisible by 2^{self.thin}")
        if not self.region_sd > 0:
            raise ConfigError(f"region_sd must be positive, got {self.region_sd}")
        if self.grid_n < MIN_GRID_POINTS or self.dense_n < MIN_GRID_POINTS:
            raise ConfigError(
                f"grid_n and dense_n must be at least {MIN_GRID_POINTS}, "
                f"got {self.grid_n} and {self.dense_n}"
            )
        if self.metric_grid < 3:
            raise ConfigError(f"metric_grid must be at least 3, got {self.metric_grid}")
        if self.oracle not in ORACLE_CHOICES:
            raise ConfigError(
                f"oracle must be one of {', '.join(ORACLE_CHOICES)}, got {self.oracle!r}"
            )
        if not self.study_points:
            raise ConfigError("study_points must not be empty")
        parse_method(self.method)
        for method in self.study_methods:
            parse_method(method)
        target = parse_target_spec(self.target)
        if self.region is not None and region_from_bounds(self.region).dim != target.dim:
            raise ConfigError(f"region has the wrong number of bounds for {target.label}")
        return self


def load_config(path: str) -> ExperimentConfig:
    """Parse a YAML file into an ExperimentConfig; unknown keys are errors."""
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")

    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    return ExperimentConfig(**data)


def dump_config(cfg: ExperimentConfig, path: str) -> None:
    """Write the config as YAML; load_config() reads it back unchanged."""
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(asdict(cfg), f, sort_keys=False)
