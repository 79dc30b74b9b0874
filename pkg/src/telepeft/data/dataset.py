"""On-disk datasets: generation, manifests, and loading.

A dataset directory holds one tensor file per image and mask (same format
as model parameters), plus a manifest recording prompts, shape classes,
split tags, per-file checksums, and the exact specs and seed that generated
everything. Regenerating from the same (specs, seed) reproduces identical
bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from ..autodiff import RngStream, load_tensor, save_tensor
from ..autodiff.serialize import FORMAT_VERSION
from ..errors import ConfigError, CorruptionError, InputError
from .scenes import SHAPE_CLASSES, SceneSpec, generate_scene
from .shifts import DomainShift, apply_shift_chain
from .vocab import tokenize

SPLIT_FRACTIONS = {"train": 0.70, "val": 0.15, "test": 0.15}


@dataclass
class Sample:
    index: int
    image: np.ndarray  # (1, H, W)
    mask: np.ndarray  # (1, H, W) binary
    token_ids: np.ndarray  # (16,)
    prompt: str
    shape_class: str
    split: str


@dataclass
class Dataset:
    directory: str
    manifest: dict
    samples: list

    def split(self, tag: str) -> list:
        if tag not in SPLIT_FRACTIONS:
            raise ConfigError(f"unknown split {tag!r}")
        return [s for s in self.samples if s.split == tag]

    def __len__(self) -> int:
        return len(self.samples)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _split_for(index: int, n: int) -> str:
    n_train = int(n * SPLIT_FRACTIONS["train"])
    n_val = int(n * SPLIT_FRACTIONS["val"])
    if index < n_train:
        return "train"
    if index < n_train + n_val:
        return "val"
    return "test"


def generate_dataset(
    out_dir: str,
    scene: SceneSpec,
    shifts=(),
    n: int = 300,
    seed: int = 0,
) -> Dataset:
    """Write `n` samples plus a manifest under `out_dir` and load them back.

    Target classes cycle deterministically through the shape classes, so
    every class is prompted in exactly a third of the samples (up to
    rounding). Shifts apply to images only; masks always match the clean
    target geometry.
    """
    if n < 1:
        raise ConfigError(f"need at least one sample, got {n}")
    shifts = tuple(shifts)
    root = RngStream(seed)
    images_dir = os.path.join(out_dir, "images")
    masks_dir = os.path.join(out_dir, "masks")
    try:
        os.makedirs(images_dir, exist_ok=True)
        os.makedirs(masks_dir, exist_ok=True)
    except OSError as exc:
        raise CorruptionError(f"cannot create dataset directories under {out_dir}: {exc}")

    entries = []
    for i in range(n):
        target_class = SHAPE_CLASSES[i % len(SHAPE_CLASSES)]
        scene_out = generate_scene(scene, root.child(f"sample{i}"), target_class)
        image = apply_shift_chain(scene_out.image, shifts)
        image_file = f"images/sample_{i:05d}.bin"
        mask_file = f"masks/sample_{i:05d}.bin"
        save_tensor(os.path.join(out_dir, image_file), image, f"image{i}")
        save_tensor(os.path.join(out_dir, mask_file), scene_out.mask, f"mask{i}")
        entries.append(
            {
                "index": i,
                "image": image_file,
                "mask": mask_file,
                "image_sha256": _sha256_file(os.path.join(out_dir, image_file)),
                "mask_sha256": _sha256_file(os.path.join(out_dir, mask_file)),
                "prompt": scene_out.prompt,
                "shape_class": target_class,
                "split": _split_for(i, n),
                "target_geometry": {
                    "shape": scene_out.target.shape,
                    "cx": scene_out.target.cx,
                    "cy": scene_out.target.cy,
                    "size": scene_out.target.size,
                },
            }
        )

    manifest = {
        "format_version": FORMAT_VERSION,
        "generator_seed": seed,
        "scene_spec": scene.to_dict(),
        "shifts": [s.to_dict() for s in shifts],
        "samples": entries,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return load_dataset(out_dir)


def load_dataset(directory: str, verify: bool = True) -> Dataset:
    """Read a dataset back in manifest order, tokenizing every prompt."""
    manifest_path = os.path.join(directory, "manifest.json")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"no dataset manifest at {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CorruptionError(
            f"{manifest_path}: format_version {manifest.get('format_version')} unsupported"
        )
    samples = []
    for entry in manifest["samples"]:
        image_path = os.path.join(directory, entry["image"])
        mask_path = os.path.join(directory, entry["mask"])
        if verify:
            for path, recorded in (
                (image_path, entry["image_sha256"]),
                (mask_path, entry["mask_sha256"]),
            ):
                if _sha256_file(path) != recorded:
                    raise CorruptionError(f"{path}: checksum mismatch")
        _, image = load_tensor(image_path)
        _, mask = load_tensor(mask_path)
        if image.shape != mask.shape or image.ndim != 3:
            raise CorruptionError(
                f"{image_path}: image {image.shape} and mask {mask.shape} disagree"
            )
        try:
            token_ids = tokenize(entry["prompt"])
        except InputError as exc:
            raise InputError(f"sample {entry['index']}: {exc}") from exc
        samples.append(
            Sample(
                index=int(entry["index"]),
                image=image,
                mask=mask,
                token_ids=token_ids,
                prompt=entry["prompt"],
                shape_class=entry["shape_class"],
                split=entry["split"],
            )
        )
    return Dataset(directory=directory, manifest=manifest, samples=samples)
