"""Run configuration stored as JSON.

Every field has a default, so an empty file (or none at all) is valid. The
config hash is the sha256 of the canonical JSON form (sorted keys, compact
separators) of the fully resolved config, minus the thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from typing import Optional

from .camera import CameraRanges
from .eval.losses import LossWeights
from .motion_net import NetConfig, TrainConfig
from .proxy import ContactParams

CONFIG_ENV = "PROXYMOTION_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class CameraConfig:
    fov: tuple = (30.0, 90.0)
    distance: tuple = (1.0, 5.0)
    height: tuple = (0.5, 2.0)
    follow: bool = True
    num_waypoints: int = 4
    num_cameras: int = 4

    def ranges(self) -> CameraRanges:
        return CameraRanges(tuple(self.fov), tuple(self.distance), tuple(self.height))


@dataclass
class NoiseConfig:
    value: float = 0.01
    mode: str = "std"


@dataclass
class NetworkConfig:
    window: int = 81
    hidden: int = 64
    dilations: tuple = (1, 3, 9, 27)
    descent_tokens: int = 8
    descent_dim: int = 32
    iterations: int = 3
    residual: str = "value"
    fuse: str = "concat"

    def build(self, contact_ids) -> NetConfig:
        return NetConfig(window=self.window, hidden=self.hidden, dilations=tuple(self.dilations),
                         descent_tokens=self.descent_tokens, descent_dim=self.descent_dim,
                         iterations=self.iterations, residual=self.residual, fuse=self.fuse,
                         contact_ids=tuple(contact_ids))


@dataclass
class TrainingConfig:
    stage1_steps: int = 1000
    stage2_steps: int = 1000
    lr: float = 1e-4
    optimizer: str = "adam"
    views: int = 2
    frames: int = 3
    mask_rate: float = 0.5


@dataclass
class Config:
    skeleton: Optional[str] = None
    seed: Optional[int] = None
    threads: int = 1
    camera: CameraConfig = field(default_factory=CameraConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    contact: ContactParams = field(default_factory=ContactParams)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def validate(self) -> "Config":
        for name in ("fov", "distance", "height"):
            lo, hi = getattr(self.camera, name)
            if not lo <= hi:
                raise ConfigError(f"camera.{name} range is empty: [{lo}, {hi}]")
        if self.noise.mode not in ("std", "variance") or self.noise.value < 0:
            raise ConfigError("noise.mode must be 'std' or 'variance' with a non-negative value")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.camera.num_cameras < 1:
            raise ConfigError("camera.num_cameras must be >= 1")
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def digest(self) -> str:
        # the thread count never changes outputs, so it stays out of the hash
        data = self.to_dict()
        data.pop("threads")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def train_config(self, contact_ids) -> TrainConfig:
        t = self.training
        return TrainConfig(seed=self.seed or 0, stage1_steps=t.stage1_steps, stage2_steps=t.stage2_steps, lr=t.lr,
                           optimizer=t.optimizer, views=t.views, frames=t.frames, mask_rate=t.mask_rate,
                           net=self.network.build(contact_ids), loss=self.loss)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown} in {where or 'top level'}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}{name}.")
        elif isinstance(current, tuple):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where or 'config'}: {exc}") from exc


def config_from_dict(data: dict) -> Config:
    return _build(Config, data, "").validate()


def load_config(path=None) -> Config:
    """Load `path`, else the file named by $PROXYMOTION_CONFIG, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config().validate()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
