from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from typing import Any, Optional

import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class TransformConfig:
    pca_k: int = 4
    freq_distinct_cap: int = 20
    groupby_pair_cap: int = 8
    groupby_key_cap: int = 100
    selection_keep_fraction: float = 0.5


@dataclass(frozen=True)
class ExplorationConfig:
    depth_cap: int = 4
    hpo_fraction: float = 0.1
    hpo_floor_seconds: float = 2.0
    # evaluation cap per HPO action when the clock counts iterations
    hpo_evaluations: int = 4
    phi: float = 0.0
    allow_drop: bool = False


@dataclass(frozen=True)
class PolicyConfig:
    alpha: float = 0.05
    gamma: float = 0.99
    epsilon: float = 0.2


@dataclass(frozen=True)
class ExplorerConfig:
    holdout_fraction: float = 0.33
    folds: int = 5
    workers: int = 4
    transforms: TransformConfig = field(default_factory=TransformConfig)
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{where}' must be a mapping, got {type(data).__name__}")

    known = {f.name: f for f in fields(cls)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"Unknown config key: {where}.{key}" if where else f"Unknown config key: {key}")
        default = getattr(cls(), key)
        path = f"{where}.{key}" if where else key
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, path)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{path} must be a boolean")
            kwargs[key] = value
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{path} must be an integer")
            kwargs[key] = value
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path} must be a number")
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def validate_config(config: ExplorerConfig) -> ExplorerConfig:
    if not 0.0 < config.holdout_fraction < 1.0:
        raise ConfigError("holdout_fraction must be in (0, 1)")
    if config.folds < 2:
        raise ConfigError("folds must be >= 2")
    if config.workers < 1:
        config = replace(config, workers=1)
    if config.exploration.depth_cap < 0:
        raise ConfigError("exploration.depth_cap must be >= 0")
    if not 0.0 < config.exploration.hpo_fraction <= 1.0:
        raise ConfigError("exploration.hpo_fraction must be in (0, 1]")
    if config.exploration.hpo_evaluations < 1:
        raise ConfigError("exploration.hpo_evaluations must be >= 1")
    if config.exploration.phi < 0:
        raise ConfigError("exploration.phi must be >= 0")
    if not 0.0 <= config.policy.gamma < 1.0:
        raise ConfigError("policy.gamma must be in [0, 1)")
    if config.policy.alpha <= 0:
        raise ConfigError("policy.alpha must be > 0")
    if not 0.0 <= config.policy.epsilon <= 1.0:
        raise ConfigError("policy.epsilon must be in [0, 1]")
    if not 0.0 < config.transforms.selection_keep_fraction <= 1.0:
        raise ConfigError("transforms.selection_keep_fraction must be in (0, 1]")
    return config


def load_config(path: Optional[str]) -> ExplorerConfig:
    """Read a YAML config file; a missing path gives the defaults."""
    if not path:
        return ExplorerConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in config file {path}: {e}") from e
    if data is None:
        data = {}
    return validate_config(_build(ExplorerConfig, data, ""))
