from .backbone import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    ConditionalEmbedding,
    Decoder,
    EncoderActivations,
    LayerRecord,
    RefineHead,
    SegmentationModel,
    TextEncoder,
    VisionEncoder,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm2d,
    Conv2d,
    LayerNorm,
    Linear,
    Mlp,
    MultiHeadAttention,
    TransformerBlock,
)
from .module import Module
from .spec import PAPER_SPEC, TEXT_LEN, ModelSpec

__all__ = [
    "BOS_ID",
    "BatchNorm2d",
    "ConditionalEmbedding",
    "Conv2d",
    "Decoder",
    "EOS_ID",
    "EncoderActivations",
    "LayerNorm",
    "LayerRecord",
    "Linear",
    "Mlp",
    "Module",
    "ModelSpec",
    "MultiHeadAttention",
    "PAD_ID",
    "PAPER_SPEC",
    "RefineHead",
    "SegmentationModel",
    "TEXT_LEN",
    "TextEncoder",
    "TransformerBlock",
    "UNK_ID",
    "VisionEncoder",
    "load_checkpoint",
    "save_checkpoint",
]
