"""The attached form of a placement plan: real parameter-bearing modules.

A PlacementPlan is a pure value; attaching it to a model instantiates one
Adapter or LoraPair per site (each seeded from its own named RNG child) plus
the auxiliary blocks. The backbone consults this runtime at its hook points.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import RngStream
from ..errors import ConfigError
from ..model.module import Module
from ..model.spec import ModelSpec
from .adapter import Adapter
from .blocks import CrossModalBlock, DecoderEnhancement
from .lora import LORA_POSITIONS, LoraPair
from .plan import PlacementPlan


def _site_key(branch: str, layer: int, position: str) -> str:
    return f"{branch}.{layer}.{position}"


class PeftRuntime(Module):
    def __init__(self, plan: PlacementPlan, spec: ModelSpec, rng: RngStream):
        super().__init__()
        self.adapters: dict[str, Adapter] = {}
        self.lora: dict[str, LoraPair] = {}
        for site in plan.sites:
            key = _site_key(site.branch, site.layer, site.position)
            width = plan.branch_width(spec, site.branch)
            if site.position in LORA_POSITIONS:
                self.lora[key] = LoraPair(width, site.d_adapter, rng.child(key))
            else:
                self.adapters[key] = Adapter(
                    width, plan.effective_dim(site, spec), rng.child(key)
                )
        self.cross_modal = (
            CrossModalBlock(spec.vision_dim, spec.text_dim, spec.cond_dim, plan.d_base, rng.child("cross_modal"))
            if plan.cross_modal
            else None
        )
        self.enhancement = (
            DecoderEnhancement(rng.child("enhancement")) if plan.decoder_enh else None
        )
        self._plan = plan

    @property
    def plan(self) -> PlacementPlan:
        return self._plan

    def adapter_at(self, branch: str, layer: int, position: str) -> Adapter | None:
        return self.adapters.get(_site_key(branch, layer, position))

    def lora_for_layer(self, branch: str, layer: int) -> dict | None:
        """Projection-name -> LoraPair map for one attention block."""
        found = {}
        for position in LORA_POSITIONS:
            pair = self.lora.get(_site_key(branch, layer, position))
            if pair is not None:
                found[position.removeprefix("lora_")] = pair
        return found or None

    def force_alpha(self, value: float) -> None:
        for adapter in self.adapters.values():
            adapter.alpha.data = np.asarray(float(value))

    def alpha_values(self) -> list[tuple]:
        """(branch, layer, position, bottleneck width, alpha) per adapter site."""
        rows = []
        for site in self._plan.sites:
            if site.position in LORA_POSITIONS:
                continue
            adapter = self.adapters[_site_key(site.branch, site.layer, site.position)]
            rows.append(
                (
                    site.branch,
                    site.layer,
                    site.position,
                    adapter.w_down.data.shape[1],
                    float(adapter.alpha.data),
                )
            )
        return rows

    def has_alphas(self) -> bool:
        return bool(self.adapters)

    def check_spec(self, spec: ModelSpec) -> None:
        for site in self._plan.sites:
            try:
                self._plan.branch_width(spec, site.branch)
            except ConfigError as exc:
                raise ConfigError(f"plan incompatible with model spec: {exc}") from exc
