"""Checkpoint IO: model directories carrying spec, plan, and all arrays."""

from __future__ import annotations

import os

from ..autodiff import RngStream, load_model_dir, save_model_dir
from ..errors import ConfigError
from .backbone import SegmentationModel
from .spec import ModelSpec


def save_checkpoint(model: SegmentationModel, directory: str, extra: dict | None = None) -> None:
    meta = {"model_spec": model.spec.to_dict()}
    if model.peft is not None:
        meta["plan"] = model.peft.plan.to_dict()
    meta.update(extra or {})
    os.makedirs(directory, exist_ok=True)
    save_model_dir(directory, model.state_arrays(), meta)


def load_checkpoint(directory: str, verify: bool = True) -> tuple[SegmentationModel, dict]:
    if not os.path.isdir(directory):
        raise ConfigError(f"checkpoint directory not found: {directory}")
    arrays, manifest = load_model_dir(directory, verify=verify)
    spec = ModelSpec.from_dict(manifest["model_spec"])
    model = SegmentationModel(spec, RngStream(0))
    if manifest.get("plan"):
        from ..peft.plan import PlacementPlan

        plan = PlacementPlan.from_dict(manifest["plan"])
        model.attach_plan(plan, RngStream(0))
    model.load_state_arrays(arrays)
    return model, manifest
