"""Training hyper-parameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    lambda_dice: float = 1.5
    lambda_bce: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 1e-3
    batch_size: int = 32
    scheduler_factor: float = 0.3
    scheduler_patience: int = 5
    early_stop_patience: int = 20
    max_epochs: int = 100
    seeds: tuple = (11, 23, 37)
    dice_eps: float = 1.0

    def __post_init__(self):
        if self.lambda_dice < 0 or self.lambda_bce < 0:
            raise ConfigError("loss coefficients must be non-negative")
        if self.scheduler_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patiences must be >= 1")
        if not 0 < self.scheduler_factor < 1:
            raise ConfigError("scheduler factor must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and max_epochs >= 0")
        if self.dice_eps < 0:
            raise ConfigError("dice_eps must be non-negative")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        if "seeds" in data:
            data = dict(data, seeds=tuple(data["seeds"]))
        return cls(**data)
