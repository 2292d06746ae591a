"""Run configuration: documented defaults plus `key = value` text files.

Every knob of the pipeline lives here with its default; unknown keys are
hard errors so typos cannot silently fall back to defaults. Keys are
``section.field`` (see README for the full table), e.g.::

    seed = 7
    trajectory.loops = 1
    lidar.range_noise_sigma = 0.0
    filter.n_particles = 500
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from lotloc.lshape import LShapeParams
from lotloc.mcl import FilterParams
from lotloc.segmentation import SegmentationParams
from lotloc.worldsim import INIT_SIGMA_HEADING, INIT_SIGMA_POS, LidarSpec


class ConfigError(ValueError):
    """Malformed configuration file or value."""


@dataclass(frozen=True)
class InitFixParams:
    """Noise of the simulated initial position fix."""

    sigma_pos: float = INIT_SIGMA_POS
    sigma_heading: float = INIT_SIGMA_HEADING


@dataclass(frozen=True)
class RouteParams:
    """Trajectory generation knobs (waypoints come from `trajectory`)."""

    speed: float = 2.0
    turn_radius: float = 2.0
    accel: float = 0.5
    loops: int = 3
    odom_rate: float = 100.0
    odom_sigma_v: float = 0.01
    odom_sigma_yaw_rate: float = 0.002


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    world: str = "default"
    map: str = "from-world"
    trajectory: str = "default"
    init: InitFixParams = field(default_factory=InitFixParams)
    route: RouteParams = field(default_factory=RouteParams)
    lidar: LidarSpec = field(default_factory=LidarSpec)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    lshape: LShapeParams = field(default_factory=LShapeParams)
    filter: FilterParams = field(default_factory=FilterParams)


_TOP_LEVEL = {"seed": int, "world": str, "map": str, "trajectory": str}
_SECTIONS = {
    "init": InitFixParams,
    "trajectory": RouteParams,  # trajectory.speed etc.; bare `trajectory` is the route source
    "lidar": LidarSpec,
    "segmentation": SegmentationParams,
    "lshape": LShapeParams,
    "filter": FilterParams,
}
_SECTION_ATTR = {
    "init": "init",
    "trajectory": "route",
    "lidar": "lidar",
    "segmentation": "segmentation",
    "lshape": "lshape",
    "filter": "filter",
}


def _coerce(raw: str, target_type: type, key: str):
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"value {raw!r} for key {key!r} is not a valid {target_type.__name__}") from None


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """Apply string key/value overrides onto a config, validating keys."""
    top: dict[str, object] = {}
    per_section: dict[str, dict[str, object]] = {}
    for key, raw in overrides.items():
        if key in _TOP_LEVEL:
            top[key] = _coerce(raw, _TOP_LEVEL[key], key)
            continue
        if "." in key:
            section, field_name = key.split(".", 1)
            cls = _SECTIONS.get(section)
            if cls is not None:
                fields = {f.name: f for f in dataclasses.fields(cls)}
                if field_name in fields:
                    ftype = {"int": int, "float": float, "str": str}.get(fields[field_name].type, float)
                    per_section.setdefault(section, {})[field_name] = _coerce(raw, ftype, key)
                    continue
        raise ConfigError(f"unknown configuration key {key!r}")
    for section, values in per_section.items():
        attr = _SECTION_ATTR[section]
        try:
            top[attr] = replace(getattr(config, attr), **values)
        except ValueError as exc:
            raise ConfigError(f"invalid value in section {section!r}: {exc}") from None
    try:
        return replace(config, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    overrides: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {line_no}: empty key or value in {raw!r}")
        if key in overrides:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        overrides[key] = value
    return apply_overrides(base or RunConfig(), overrides)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base)
