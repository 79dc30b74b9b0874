"""Backbone geometry."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

# Prompts are padded or truncated to this many token positions.
TEXT_LEN = 16

# How many encoder layers carry adapters: the first chunk of the vision
# stack and the final chunk of the text stack.
VISION_ADAPTED_LAYERS = 9
TEXT_ADAPTED_LAYERS = 3


@dataclass(frozen=True)
class ModelSpec:
    image_size: int = 32
    patch_size: int = 4
    vision_layers: int = 9
    vision_dim: int = 64
    vision_heads: int = 4
    text_layers: int = 9
    text_dim: int = 48
    vocab_size: int = 64
    cond_dim: int = 64
    extract_layers: tuple = (3, 6, 9)
    mlp_ratio: int = 4

    def __post_init__(self):
        if self.image_size % self.patch_size:
            raise ConfigError(
                f"image_size {self.image_size} not divisible by patch_size {self.patch_size}"
            )
        if self.vision_dim % self.vision_heads:
            raise ConfigError(
                f"vision_dim {self.vision_dim} not divisible by {self.vision_heads} heads"
            )
        ext = tuple(self.extract_layers)
        if not ext or list(ext) != sorted(set(ext)):
            raise ConfigError(f"extract_layers must be strictly ascending, got {ext}")
        if ext[0] < 1 or ext[-1] > self.vision_layers:
            raise ConfigError(
                f"extract_layers {ext} outside [1, {self.vision_layers}]"
            )
        object.__setattr__(self, "extract_layers", ext)

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def tokens(self) -> int:
        return self.grid * self.grid

    def adapted_vision_layers(self) -> list[int]:
        return list(range(1, min(VISION_ADAPTED_LAYERS, self.vision_layers) + 1))

    def adapted_text_layers(self) -> list[int]:
        first = max(1, self.text_layers - TEXT_ADAPTED_LAYERS + 1)
        return list(range(first, self.text_layers + 1))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extract_layers"] = list(self.extract_layers)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model spec keys: {sorted(unknown)}")
        if "extract_layers" in data:
            data = dict(data, extract_layers=tuple(data["extract_layers"]))
        return cls(**data)


# Geometry of the full-size model the parameter budgets are compared
# against: 12-layer encoders at CLIP ViT-B widths, 512-wide conditioning.
PAPER_SPEC = ModelSpec(
    image_size=352,
    patch_size=16,
    vision_layers=12,
    vision_dim=768,
    vision_heads=12,
    text_layers=12,
    text_dim=512,
    vocab_size=49408,
    cond_dim=512,
    extract_layers=(3, 6, 9),
    mlp_ratio=4,
)
