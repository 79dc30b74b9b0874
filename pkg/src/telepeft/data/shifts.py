"""Deterministic domain shifts applied to images (never to masks)."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from ..autodiff.rng import RngStream
from ..errors import ConfigError, UsageError

SHIFT_KINDS = ("none", "invert", "gaussian_noise", "blur", "contrast_drop")


@dataclass(frozen=True)
class DomainShift:
    kind: str = "none"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in SHIFT_KINDS:
            raise UsageError(f"unknown shift kind {self.kind!r} (expected {SHIFT_KINDS})")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "strength": self.strength}

    @classmethod
    def from_dict(cls, data: dict) -> "DomainShift":
        unknown = set(data) - {"kind", "strength"}
        if unknown:
            raise ConfigError(f"unknown shift keys: {sorted(unknown)}")
        return cls(data.get("kind", "none"), float(data.get("strength", 0.0)))


def _noise_stream(image: np.ndarray, strength: float) -> RngStream:
    # Noise is a pure function of (image, strength): the stream seed is
    # derived from the image bytes, so the same image always gets the
    # same noise field.
    digest = hashlib.sha256(image.tobytes() + repr(strength).encode()).digest()
    return RngStream(int.from_bytes(digest[:8], "little"))


def _box_blur(image: np.ndarray) -> np.ndarray:
    padded = np.pad(image, ((0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.zeros_like(image)
    for dy in range(3):
        for dx in range(3):
            out += padded[:, dy : dy + image.shape[1], dx : dx + image.shape[2]]
    return out / 9.0


def apply_domain_shift(image: np.ndarray, shift: DomainShift) -> np.ndarray:
    """Shifted copy of a (1, H, W) image, clamped to [0, 1]."""
    kind, strength = shift.kind, shift.strength
    if kind == "none":
        return image.copy()
    if kind == "invert":
        out = 1.0 - image
    elif kind == "gaussian_noise":
        if strength == 0.0:
            return image.copy()
        noise = _noise_stream(image, strength).normal(image.shape)
        out = image + strength * noise
    elif kind == "blur":
        out = image.copy()
        for _ in range(math.ceil(strength)):
            out = _box_blur(out)
    elif kind == "contrast_drop":
        out = 0.5 + strength * (image - 0.5)
    else:  # unreachable; DomainShift validates on construction
        raise UsageError(f"unknown shift kind {kind!r}")
    return np.clip(out, 0.0, 1.0)


def apply_shift_chain(image: np.ndarray, shifts) -> np.ndarray:
    out = image
    for shift in shifts:
        out = apply_domain_shift(out, shift)
    return out


# The benchmark's standard fine-tuning domain: bright shapes become dark
# and mild noise is layered on top, which collapses zero-shot accuracy
# while staying learnable by adapters.
DEFAULT_SHIFT_CHAIN = (DomainShift("invert", 1.0), DomainShift("gaussian_noise", 0.1))
