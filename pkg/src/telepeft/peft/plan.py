"""Placement plans: which trainable modules attach where.

A plan is an immutable value listing every insertion site (branch, layer,
sub-position, scheduled width) plus flags for the auxiliary blocks. Plans
serialize to JSON and are stored inside fine-tuned checkpoints, so they
round-trip losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..errors import ConfigError, UsageError
from ..model.spec import ModelSpec
from .lora import LORA_POSITIONS
from .schedules import (
    alternate_vision_dim,
    clip_bottleneck,
    conditional_adapter_dim,
    pooled_text_adapter_dim,
    telescopic_vision_dims,
    text_adapter_dim,
)

STRATEGIES = ("telescopic", "uniform", "alternate", "lora")
CONFIGS = ("vision_only", "vision_text", "full")

ADAPTER_POSITIONS = (
    "post_attention",
    "post_mlp",
    "on_features",
    "on_pooled",
    "on_projection",
)


@dataclass(frozen=True, order=True)
class AdapterSite:
    branch: str  # vision | text | conditional
    layer: int
    position: str
    d_adapter: int  # scheduled width, before clipping against the branch width


@dataclass(frozen=True)
class PlacementPlan:
    strategy: str
    d_base: int
    sites: tuple
    cross_modal: bool = False
    decoder_enh: bool = False
    lora_rank: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.strategy!r}")
        keys = [(s.branch, s.layer, s.position) for s in self.sites]
        if len(keys) != len(set(keys)):
            raise ConfigError("duplicate (branch, layer, position) in plan")

    def branch_width(self, spec: ModelSpec, branch: str) -> int:
        widths = {
            "vision": spec.vision_dim,
            "text": spec.text_dim,
            "conditional": spec.cond_dim,
        }
        if branch not in widths:
            raise ConfigError(f"unknown branch {branch!r}")
        return widths[branch]

    def effective_dim(self, site: AdapterSite, spec: ModelSpec) -> int:
        """Bottleneck width actually used at `site` (rank for low-rank sites)."""
        if site.position in LORA_POSITIONS:
            return site.d_adapter
        return clip_bottleneck(site.d_adapter, self.branch_width(spec, site.branch))

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "d_base": self.d_base,
            "sites": [
                {
                    "branch": s.branch,
                    "layer": s.layer,
                    "position": s.position,
                    "d_adapter": s.d_adapter,
                }
                for s in self.sites
            ],
            "cross_modal": self.cross_modal,
            "decoder_enh": self.decoder_enh,
            "lora_rank": self.lora_rank,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "PlacementPlan":
        known = {"strategy", "d_base", "sites", "cross_modal", "decoder_enh", "lora_rank"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plan keys: {sorted(unknown)}")
        sites = tuple(
            AdapterSite(s["branch"], int(s["layer"]), s["position"], int(s["d_adapter"]))
            for s in data["sites"]
        )
        return cls(
            strategy=data["strategy"],
            d_base=int(data["d_base"]),
            sites=sites,
            cross_modal=bool(data.get("cross_modal", False)),
            decoder_enh=bool(data.get("decoder_enh", False)),
            lora_rank=data.get("lora_rank"),
        )

    @classmethod
    def from_json(cls, text: str) -> "PlacementPlan":
        return cls.from_dict(json.loads(text))


def _check_config(config: str) -> None:
    if config not in CONFIGS:
        raise UsageError(f"unknown adapter config {config!r} (expected one of {CONFIGS})")


def _encoder_sites(spec: ModelSpec, config: str, vision_dims, text_dim: int, cond_dim: int):
    sites = []
    for i, layer in enumerate(spec.adapted_vision_layers()):
        for position in ("post_attention", "post_mlp"):
            sites.append(AdapterSite("vision", layer, position, vision_dims[i]))
    if config in ("vision_text", "full"):
        for layer in spec.adapted_text_layers():
            for position in ("post_attention", "post_mlp"):
                sites.append(AdapterSite("text", layer, position, text_dim))
    if config == "full":
        sites.append(AdapterSite("conditional", 0, "on_projection", cond_dim))
    return tuple(sites)


def build_main_plan(
    spec: ModelSpec, config: str, d_base: int = 64, strategy: str = "telescopic"
) -> PlacementPlan:
    """Encoder-internal placement: two adapters per adapted layer.

    `telescopic` widths grow with depth; `uniform` uses one constant width
    chosen so the total budget matches the telescopic plan as closely as
    the clipping rules allow (never undershooting it by more than 2%).
    """
    _check_config(config)
    if strategy not in ("telescopic", "uniform"):
        raise UsageError(f"build_main_plan handles telescopic/uniform, not {strategy!r}")
    n_vision = len(spec.adapted_vision_layers())
    if strategy == "telescopic":
        vision_dims = telescopic_vision_dims(d_base, n_vision)
        sites = _encoder_sites(
            spec, config, vision_dims, text_adapter_dim(d_base), conditional_adapter_dim(d_base)
        )
        return PlacementPlan("telescopic", d_base, sites)
    constant = _matched_uniform_dim(spec, config, d_base)
    sites = _encoder_sites(spec, config, [constant] * n_vision, constant, constant)
    return PlacementPlan("uniform", d_base, sites)


def _matched_uniform_dim(spec: ModelSpec, config: str, d_base: int) -> int:
    """Constant width whose budget best matches the telescopic plan's.

    Widths are still clipped per site, so an exact match is not always
    reachable; candidates that undercut the telescopic budget by more than
    2% are rejected before picking the closest total.
    """
    from .budget import count_trainable  # local import to avoid a cycle

    target = count_trainable(
        build_main_plan(spec, config, d_base, "telescopic"), spec, include_refine_head=False
    ).grand_total
    floor_total = target / 1.02
    best_dim, best_gap = None, None
    n_vision = len(spec.adapted_vision_layers())
    for candidate in range(1, 4 * d_base + 1):
        sites = _encoder_sites(spec, config, [candidate] * n_vision, candidate, candidate)
        plan = PlacementPlan("uniform", d_base, sites)
        total = count_trainable(plan, spec, include_refine_head=False).grand_total
        if total < floor_total:
            continue
        gap = abs(total - target)
        if best_gap is None or gap < best_gap:
            best_dim, best_gap = candidate, gap
    if best_dim is None:
        raise ConfigError("no uniform width can match the telescopic budget")
    return best_dim


def build_alternate_plan(
    spec: ModelSpec, config: str, d_base: int = 64, with_cross_modal: bool = False
) -> PlacementPlan:
    """Feature-level placement: adapters only at the encoder/decoder seam.

    One adapter per extracted vision layer (progressively wider with
    extract depth), one on the pooled text embedding, the usual conditional
    adapter, an optional cross-modal attention bridge, and the decoder
    enhancement mask (always on).
    """
    _check_config(config)
    n = len(spec.extract_layers)
    sites = [
        AdapterSite("vision", layer, "on_features", alternate_vision_dim(d_base, n, i + 1))
        for i, layer in enumerate(spec.extract_layers)
    ]
    if config in ("vision_text", "full"):
        sites.append(AdapterSite("text", 0, "on_pooled", pooled_text_adapter_dim(d_base)))
    if config == "full":
        sites.append(AdapterSite("conditional", 0, "on_projection", conditional_adapter_dim(d_base)))
    return PlacementPlan(
        "alternate", d_base, tuple(sites), cross_modal=with_cross_modal, decoder_enh=True
    )


def build_lora_plan(spec: ModelSpec, rank: int = 4, d_base: int = 64) -> PlacementPlan:
    """Low-rank pairs on q/k/v/out of every attention block in both encoders."""
    if rank < 1:
        raise UsageError(f"lora rank must be >= 1, got {rank}")
    sites = []
    for layer in range(1, spec.vision_layers + 1):
        for position in LORA_POSITIONS:
            sites.append(AdapterSite("vision", layer, position, rank))
    for layer in range(1, spec.text_layers + 1):
        for position in LORA_POSITIONS:
            sites.append(AdapterSite("text", layer, position, rank))
    return PlacementPlan("lora", d_base, tuple(sites), lora_rank=rank)


def build_plan(
    spec: ModelSpec,
    strategy: str,
    config: str = "full",
    d_base: int = 64,
    lora_rank: int = 4,
    with_cross_modal: bool = False,
) -> PlacementPlan:
    """Single entry point used by the CLI."""
    if strategy in ("telescopic", "uniform"):
        return build_main_plan(spec, config, d_base, strategy)
    if strategy == "alternate":
        return build_alternate_plan(spec, config, d_base, with_cross_modal)
    if strategy == "lora":
        return build_lora_plan(spec, lora_rank, d_base)
    raise UsageError(f"unknown strategy {strategy!r}")
