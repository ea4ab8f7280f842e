"""Configuration files and run manifests.

Configs are nested key-value YAML documents validated against the dataclass
schemas; unknown keys are rejected so typos fail fast. Every CLI run writes a
manifest recording the command, the fully resolved configuration, and the
seed; feeding a manifest back via --config reproduces the run byte for byte.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any

import yaml

from .alignment import TripletConfig
from .harness import (
    FeatureConfig,
    OracleConfig,
    SceneConfig,
    SelfTrainConfig,
    Toggles,
)
from .proposals import IEConfig
from .refinery import ThresholdMargin


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


_NESTED = {
    "margin": ThresholdMargin,
    "ie": IEConfig,
    "triplet": TripletConfig,
    "toggles": Toggles,
    "source_scene": SceneConfig,
    "target_scene": SceneConfig,
    "oracle": OracleConfig,
    "features": FeatureConfig,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kwargs: dict[str, Any] = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        nested = _NESTED.get(f.name)
        if nested is not None and cls is SelfTrainConfig:
            kwargs[f.name] = _build(nested, value, f"{path}.{f.name}")
        elif cls is SceneConfig and f.name == "points_per_instance":
            kwargs[f.name] = {
                str(k): (float(v[0]), float(v[1])) for k, v in value.items()
            }
        elif cls is SceneConfig and f.name == "instances_per_frame":
            kwargs[f.name] = {str(k): int(v) for k, v in value.items()}
        else:
            kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def selftrain_config_from_dict(data: dict) -> SelfTrainConfig:
    return _build(SelfTrainConfig, data, "selftrain")


def scene_config_from_dict(data: dict) -> SceneConfig:
    return _build(SceneConfig, data, "scene")


def _plain(value):
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            f.name: _plain(getattr(value, f.name))
            for f in dataclasses.fields(value)
        }
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg) -> dict:
    """Resolve a config dataclass to a plain nested dict (YAML-safe)."""
    return _plain(cfg)


def load_config_file(path: str | Path) -> dict:
    """Read a YAML config; a manifest is accepted and unwraps to its config."""
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    if "command" in data and "config" in data:
        return data["config"] or {}
    return data


def write_manifest(
    path: str | Path, command: str, cfg, seed: int, outputs: list[str]
) -> None:
    doc = {
        "command": command,
        "seed": int(seed),
        "outputs": list(outputs),
        "config": config_to_dict(cfg),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True, default_flow_style=False)
