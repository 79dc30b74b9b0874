"""Procedural scene generation: textured backgrounds with 1-3 brighter
shapes, one of which is the prompted segmentation target."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..autodiff.rng import RngStream
from ..autodiff.tensor import _upsample_matrix
from ..errors import ConfigError

SHAPE_CLASSES = ("disk", "square", "triangle")


@dataclass(frozen=True)
class SceneSpec:
    image_size: int = 32
    min_shapes: int = 1
    max_shapes: int = 3
    size_range: tuple = (9, 14)  # full extent in pixels
    bg_level: float = 0.3
    texture_amp: float = 0.06
    fg_offset: float = 0.45
    prompt_template: str = "segment the {shape}"

    def __post_init__(self):
        if not 1 <= self.min_shapes <= self.max_shapes <= len(SHAPE_CLASSES):
            raise ConfigError(
                f"shape count range ({self.min_shapes}, {self.max_shapes}) invalid"
            )
        lo, hi = self.size_range
        # Shapes are placed in jittered quadrants, so each must fit inside
        # one quadrant with a 1px margin.
        if not 4 <= lo <= hi <= self.image_size // 2 - 2:
            raise ConfigError(
                f"size range {self.size_range} outside [4, image_size/2 - 2]"
            )
        object.__setattr__(self, "size_range", (int(lo), int(hi)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["size_range"] = list(self.size_range)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scene spec keys: {sorted(unknown)}")
        if "size_range" in data:
            data = dict(data, size_range=tuple(data["size_range"]))
        return cls(**data)


@dataclass(frozen=True)
class ShapeRecord:
    shape: str
    cx: float
    cy: float
    size: float


@dataclass
class Scene:
    image: np.ndarray  # (1, H, W) floats in [0, 1]
    mask: np.ndarray  # (1, H, W) binary, rasterized target
    prompt: str
    target: ShapeRecord
    others: list


def rasterize(shape: str, cx: float, cy: float, size: float, image_size: int) -> np.ndarray:
    """Binary mask of one shape, evaluated at pixel centers."""
    ys, xs = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
    ys += 0.5
    xs += 0.5
    half = size / 2.0
    if shape == "disk":
        return ((xs - cx) ** 2 + (ys - cy) ** 2 <= half**2).astype(np.float64)
    if shape == "square":
        return ((np.abs(xs - cx) <= half) & (np.abs(ys - cy) <= half)).astype(np.float64)
    if shape == "triangle":
        # Upward isoceles triangle: apex on top, base of width `size`.
        top = cy - half
        bottom = cy + half
        inside_y = (ys >= top) & (ys <= bottom)
        # Width grows linearly from 0 at the apex to `half` at the base.
        allowed = half * (ys - top) / (bottom - top)
        return (inside_y & (np.abs(xs - cx) <= allowed)).astype(np.float64)
    raise ConfigError(f"unknown shape class {shape!r}")


def _smooth_background(spec: SceneSpec, rng: RngStream) -> np.ndarray:
    """Coarse noise grid, bilinearly doubled up to the image resolution."""
    grid = 4
    field = spec.bg_level + rng.normal((grid, grid), std=spec.texture_amp)
    while field.shape[0] < spec.image_size:
        m = _upsample_matrix(field.shape[0], "bilinear")
        field = m @ field @ m.T
    return field


def _place_shapes(spec: SceneSpec, rng: RngStream, classes: list) -> list:
    """One shape per jittered quadrant: disjoint by construction."""
    half = spec.image_size // 2
    size_lo, size_hi = spec.size_range
    quadrants = [(0, 0), (0, half), (half, 0), (half, half)]
    chosen = rng.permutation(len(quadrants))[: len(classes)]
    placed = []
    for cls, q in zip(classes, chosen):
        qy, qx = quadrants[q]
        size = float(size_lo + rng.uniform() * (size_hi - size_lo))
        margin = size / 2.0 + 1.0
        span = half - 2.0 * margin
        cx = float(qx + margin + rng.uniform() * span)
        cy = float(qy + margin + rng.uniform() * span)
        placed.append(ShapeRecord(cls, cx, cy, size))
    return placed


def generate_scene(spec: SceneSpec, rng: RngStream, target_class: str) -> Scene:
    """One scene whose prompted target has class `target_class`."""
    others_pool = [c for c in SHAPE_CLASSES if c != target_class]
    n_shapes = int(spec.min_shapes + rng.integers(0, spec.max_shapes - spec.min_shapes + 1))
    distractors = list(rng.permutation(len(others_pool))[: n_shapes - 1])
    classes = [target_class] + [others_pool[i] for i in distractors]
    records = _place_shapes(spec, rng, classes)

    image = _smooth_background(spec, rng)
    for record in records:
        shape_mask = rasterize(record.shape, record.cx, record.cy, record.size, spec.image_size)
        image = np.where(shape_mask > 0, image + spec.fg_offset, image)
    image = np.clip(image, 0.0, 1.0)[None]

    target = records[0]
    mask = rasterize(target.shape, target.cx, target.cy, target.size, spec.image_size)[None]
    prompt = spec.prompt_template.format(shape=target_class)
    return Scene(image=image, mask=mask, prompt=prompt, target=target, others=records[1:])
