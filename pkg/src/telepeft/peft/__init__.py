from .adapter import ALPHA_INIT, Adapter, adapter_param_count
from .alpha import AlphaReport, alpha_report
from .blocks import CrossModalBlock, DecoderEnhancement
from .budget import (
    PAPER_TOTALS,
    REFINE_HEAD_PARAMS,
    BudgetRow,
    ParamBudget,
    count_trainable,
    cross_modal_param_count,
    decoder_enhancement_param_count,
)
from .lora import LORA_POSITIONS, LoraPair, lora_param_count
from .plan import (
    CONFIGS,
    STRATEGIES,
    AdapterSite,
    PlacementPlan,
    build_alternate_plan,
    build_lora_plan,
    build_main_plan,
    build_plan,
)
from .runtime import PeftRuntime
from .schedules import (
    alternate_vision_dim,
    clip_bottleneck,
    conditional_adapter_dim,
    pooled_text_adapter_dim,
    shared_cross_modal_dim,
    telescopic_vision_dims,
    text_adapter_dim,
)

__all__ = [
    "ALPHA_INIT",
    "Adapter",
    "AdapterSite",
    "AlphaReport",
    "BudgetRow",
    "CONFIGS",
    "CrossModalBlock",
    "DecoderEnhancement",
    "LORA_POSITIONS",
    "LoraPair",
    "PAPER_TOTALS",
    "ParamBudget",
    "PeftRuntime",
    "PlacementPlan",
    "REFINE_HEAD_PARAMS",
    "STRATEGIES",
    "adapter_param_count",
    "alpha_report",
    "alternate_vision_dim",
    "build_alternate_plan",
    "build_lora_plan",
    "build_main_plan",
    "build_plan",
    "clip_bottleneck",
    "conditional_adapter_dim",
    "count_trainable",
    "cross_modal_param_count",
    "decoder_enhancement_param_count",
    "lora_param_count",
    "pooled_text_adapter_dim",
    "shared_cross_modal_dim",
    "telescopic_vision_dims",
    "text_adapter_dim",
]
