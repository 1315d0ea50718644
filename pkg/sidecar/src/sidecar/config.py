"""Training configuration with protocol-faithful defaults."""

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from sidecar.errors import ConfigError

KNOWN_MODELS = ("toy-vit", "dinov2-large")


@dataclass(frozen=True)
class TrainConfig:
    """Everything that fixes a training run.

    The protocol fields default to the published fine-tuning recipe this
    trainer reproduces; change them only to study deviations. manifest and
    out_dir locate data and exports and carry no protocol meaning.
    """

    model: str = "toy-vit"
    learning_rate: float = 2e-5
    weight_decay: float = 0.01
    batch_size: int = 32
    max_epochs: int = 15
    patience: int = 3
    warmup_fraction: float = 0.10
    k: int = 5
    seed: int = 42
    mixed_precision: bool = False
    gradient_checkpointing: bool = False
    device: str = "cpu"
    manifest: str = ""
    out_dir: str = "exports"
    attn_cases: int = 16

    def __post_init__(self):
        if self.model not in KNOWN_MODELS:
            raise ConfigError(f"unknown model tag {self.model!r}, know {KNOWN_MODELS}")
        for name in ("learning_rate", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("batch_size", "max_epochs", "patience", "k", "attn_cases"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ConfigError("warmup_fraction must be in [0, 1]")


_FIELDS = {f.name: f.type for f in fields(TrainConfig)}


def config_from_obj(obj: dict) -> TrainConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(obj) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return TrainConfig(**obj)
    except TypeError as exc:
        raise ConfigError(f"bad config: {exc}") from exc


def load_config(path: str | Path) -> TrainConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_obj(obj)


def with_overrides(config: TrainConfig, **overrides) -> TrainConfig:
    given = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **given) if given else config
