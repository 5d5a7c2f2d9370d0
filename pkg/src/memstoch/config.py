"""Experiment configuration: schema, JSON loading and dotted-key overrides."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .device import DeviceParams

Mode = Literal["float", "stochastic-ideal-weights", "stochastic-memristive"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending schema path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DeviceConfig(_Strict):
    num_levels: int = Field(32, ge=2)
    on_off_ratio: float = Field(15.0, gt=1.0)
    g_max: float = Field(1.0, gt=0.0)
    sigma_ratio: float = Field(0.1, ge=0.0)
    # weight carried by a full conductance swing; sets alpha = w_max / (g_max - g_min)
    w_max: float = Field(0.5, gt=0.0)

    def params(self) -> DeviceParams:
        return DeviceParams(self.num_levels, self.on_off_ratio, self.g_max, self.sigma_ratio)


class ScheduleConfig(_Strict):
    """Per-epoch learning rate ``eta0 * gamma**epoch``."""

    eta0: float = Field(0.2, gt=0.0)
    gamma: float = Field(0.8, gt=0.0, le=1.0)

    def eta(self, epoch: int) -> float:
        return self.eta0 * self.gamma ** epoch


class SeedConfig(_Strict):
    weights: int = 1
    shuffle: int = 2
    streams: int = 3
    device_noise: int = 4
    input_noise: int = 5


class DataConfig(_Strict):
    data_dir: Optional[str] = None
    normalization: Literal["scale", "mean"] = "scale"
    train_limit: Optional[int] = Field(None, ge=1)
    test_limit: Optional[int] = Field(None, ge=1)


class ExperimentConfig(_Strict):
    topology: list[int] = Field(default_factory=lambda: [784, 256, 128, 10])
    mode: Mode = "float"
    bl_train: int = Field(10, ge=1)
    bl_infer: int = Field(10, ge=1)
    epochs: int = Field(30, ge=1)
    reset_period: int = Field(15, ge=1)
    # update-stream gain C for ideal-weight stochastic training; each overlap
    # then moves a weight by eta / (C * bl_train)
    ideal_delta_gain: float = Field(4.0, gt=0.0)
    init_scale: Optional[float] = Field(None, gt=0.0)
    eval_repetitions: int = Field(1, ge=1)
    device: DeviceConfig = Field(default_factory=DeviceConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    seeds: SeedConfig = Field(default_factory=SeedConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    output_dir: str = "runs/default"

    @field_validator("topology")
    @classmethod
    def _topology(cls, v):
        if len(v) < 2 or any(n < 1 for n in v):
            raise ValueError("topology needs >= 2 positive layer sizes")
        return v

    @property
    def stochastic(self) -> bool:
        return self.mode != "float"

    @property
    def memristive(self) -> bool:
        return self.mode == "stochastic-memristive"


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def validate(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {p} is not a section")
        node[parts[-1]] = _parse_value(raw)
    return data


def load_config(path=None, overrides: list[str] | None = None) -> ExperimentConfig:
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: invalid JSON ({err})") from None
    return validate(apply_overrides(data, overrides or []))


def dump_config(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(mode="json")


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()


def desk_profile(mode: str = "float", **changes) -> ExperimentConfig:
    """CI-sized run: first 10k train / 2k test images, 5 epochs."""
    data = {"mode": mode, "epochs": 5, "data": {"train_limit": 10_000, "test_limit": 2_000}}
    data.update(changes)
    return validate(data)


def full_profile(mode: str = "float", **changes) -> ExperimentConfig:
    """Full MNIST, 30 epochs."""
    return validate({"mode": mode, "epochs": 30, **changes})
