from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

LORA_SITES = ("q", "k", "v", "o", "mlp_in", "mlp_out")
POSITIONS = ("after_visual", "before_visual")
GROUPS = ("prior", "visual", "lora")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ToyConfig:
    vocab_size: int = 64
    model_dim: int = 64
    n_layers: int = 2
    n_heads: int = 2
    n_visual_tokens: int = 8
    prior_dim: int = 16
    lora_rank: int = 8
    lora_alpha: float = 16.0
    lora_targets: tuple[str, ...] = ("q", "v")
    prior_token_position: str = "after_visual"
    seed: int = 0
    # stub encoders and projector shapes
    patch_dim: int = 12
    visual_feature_dim: int = 32
    descriptor_dim: int = 8
    projector_layers: int = 2
    mlp_ratio: int = 4
    max_len: int = 64
    # which prefix parts are fed to the decoder
    use_visual: bool = True
    use_prior: bool = True
    dtype: str = "float64"
    lora_init_std: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "lora_targets", tuple(self.lora_targets))
        for name in ("vocab_size", "model_dim", "n_layers", "n_heads", "n_visual_tokens", "prior_dim",
                     "patch_dim", "visual_feature_dim", "descriptor_dim", "mlp_ratio", "max_len"):
            if getattr(self, name) <= 0 and not (name == "n_layers" and self.n_layers == 0):
                raise ConfigError(f"{name} must be positive")
        if self.model_dim % self.n_heads:
            raise ConfigError(f"n_heads={self.n_heads} does not divide model_dim={self.model_dim}")
        if not 1 <= self.lora_rank <= self.model_dim:
            raise ConfigError(f"lora_rank must lie in [1, model_dim], got {self.lora_rank}")
        bad = set(self.lora_targets) - set(LORA_SITES)
        if bad:
            raise ConfigError(f"unknown LoRA targets {sorted(bad)}; choose from {LORA_SITES}")
        if self.prior_token_position not in POSITIONS:
            raise ConfigError(f"prior_token_position must be one of {POSITIONS}")
        if self.projector_layers not in (1, 2):
            raise ConfigError("projector_layers must be 1 or 2")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")

    @property
    def lora_scale(self) -> float:
        return self.lora_alpha / self.lora_rank

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.n_heads

    def replace(self, **kw) -> "ToyConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lora_targets"] = list(self.lora_targets)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ToyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    steps: int = 300
    batch_size: int = 16
    weight_decay: float = 0.0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    trainable: tuple[str, ...] = GROUPS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trainable", tuple(self.trainable))
        object.__setattr__(self, "betas", tuple(self.betas))
        bad = set(self.trainable) - set(GROUPS)
        if bad:
            raise ConfigError(f"unknown trainable groups {sorted(bad)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trainable"] = list(self.trainable)
        d["betas"] = list(self.betas)
        return d


# Production-scale settings as reported for the 7B model; recorded for reference,
# far too large to run through the numpy decoder.
PRODUCTION_SCALE = {"lora_rank": 128, "lr": 1e-4, "optimizer": "AdamW", "epochs": 1}

DESK = ToyConfig()


def load_config(path) -> tuple[ToyConfig, TrainConfig]:
    """Read ``{"model": {...}, "train": {...}}`` JSON; missing sections use desk defaults."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    model = ToyConfig.from_dict(data.get("model", {}))
    train_d = dict(data.get("train", {}))
    known = {f.name for f in fields(TrainConfig)}
    unknown = set(train_d) - known
    if unknown:
        raise ConfigError(f"unknown train keys {sorted(unknown)}")
    return model, TrainConfig(**train_d)

