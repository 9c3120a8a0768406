"""Configuration dataclasses for the pipeline.

All tunables live here so that a single JSON file can drive a batch run.
Distances are metres, areas square metres; inputs are expected in a
projected CRS.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class PreprocessConfig:
    """Footprint and street cleaning parameters."""

    simplify_tol: float = 0.1
    max_building_area: float = 200_000.0
    merge_overlap_frac: float = 0.10
    merge_small_area: float = 50.0
    adjacency_tol: float = 0.5
    # Area threshold for sliver gaps.  The default is deliberately tiny
    # (10 square centimetres); at this scale the snap/fill step is a
    # topological hygiene pass, not a geometric edit.
    gap_area: float = 0.001


@dataclass(frozen=True)
class TessellationConfig:
    """Enclosed tessellation parameters."""

    default_bandwidth: float = 100.0
    min_bandwidth: float = 0.5
    bandwidth_factor: float = 1.1
    segment_step: float = 0.5
    seed_shrink: float = 0.4


@dataclass(frozen=True)
class CharacterConfig:
    """Morphometric character parameters."""

    profile_step: float = 3.0
    profile_cap: float = 50.0
    corner_angle_max: float = 170.0
    # Local closeness can be computed with hop counts or metric edge
    # lengths as shortest-path weights; metric is the default.
    closeness_metric_weights: bool = True


@dataclass(frozen=True)
class RegionalizeConfig:
    min_size: int = 75

    def __post_init__(self) -> None:
        if self.min_size < 2:
            raise ConfigError("min_size must be at least 2")


@dataclass(frozen=True)
class TaxonomyConfig:
    knn: int = 10
    noise_nn: int = 5
    # Outlier demotion thresholds over morphotope profiles.
    perim_top10_max: float = 200_000.0
    area_top10_max: float = 500_000.0
    median_area_min: float = 20.0
    median_perimeter_max: float = 5_000.0

    def __post_init__(self) -> None:
        if self.knn < 1 or self.noise_nn < 1:
            raise ConfigError("knn and noise_nn must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    """Top-level configuration; nests the per-stage blocks.

    Inputs are either file paths (``buildings_path``/``segments_path``)
    or a synthetic ``scene`` block that generates them; stage artifacts
    land in ``out_dir``.
    """

    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    tessellation: TessellationConfig = field(default_factory=TessellationConfig)
    characters: CharacterConfig = field(default_factory=CharacterConfig)
    regionalize: RegionalizeConfig = field(default_factory=RegionalizeConfig)
    taxonomy: TaxonomyConfig = field(default_factory=TaxonomyConfig)
    buildings_path: str | None = None
    segments_path: str | None = None
    external_path: str | None = None
    scene: dict | None = None
    out_dir: str = "artifacts"
    cut_k: int = 8
    discard_noise: bool = False
    seed: int = 0
    workers: int = 1
    grid_cell: float = 50_000.0

    def __post_init__(self) -> None:
        for name in ("cut_k", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.grid_cell <= 0:
            raise ConfigError("grid_cell must be positive")


class ConfigError(ValueError):
    """Raised when a config file cannot be applied."""


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "tessellation": TessellationConfig,
    "characters": CharacterConfig,
    "regionalize": RegionalizeConfig,
    "taxonomy": TaxonomyConfig,
}


def _build_section(cls: type, data: dict[str, Any], path: str) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in '{path}'")
    return cls(**data)


def config_from_dict(data: dict[str, Any]) -> PipelineConfig:
    """Build a PipelineConfig from a plain dict (e.g. parsed JSON)."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    kwargs: dict[str, Any] = {}
    top = {f.name for f in dataclasses.fields(PipelineConfig)}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section '{key}' must be an object")
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        elif key in top:
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown top-level key '{key}'")
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:  # bad scalar type for a top-level field
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: PipelineConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)
