"""Experiment configuration files (JSON or YAML) with dotted-key overrides."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

TASKS = ("gauss", "pose", "label", "ik")
SCALES = ("desk", "full")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str
    experiment: str
    seed: int = 0
    scale: str = "desk"
    output_dir: str = "results"
    train: dict = field(default_factory=dict)  # TrainParams overrides
    disc: dict = field(default_factory=dict)  # DiscParams overrides
    options: dict = field(default_factory=dict)  # experiment-specific knobs
    paths: dict = field(default_factory=dict)  # input files

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.scale not in SCALES:
            raise ConfigError(f"scale must be one of {SCALES}, got {self.scale!r}")
        for name, p in self.paths.items():
            if not Path(p).exists():
                raise ConfigError(f"{name} path {p} does not exist")

    def to_dict(self) -> dict:
        return asdict(self)


def parse_override(item: str):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def apply_overrides(doc: dict, overrides) -> dict:
    doc = json.loads(json.dumps(doc))
    for item in overrides or ():
        keys, value = parse_override(item)
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {item!r}: {k} is not a mapping")
        node[keys[-1]] = value
    return doc


def load_config(path, overrides=()) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} does not hold a mapping")
    doc = apply_overrides(doc, overrides)
    try:
        return ExperimentConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1, sort_keys=True) + "\n")
