from .dataset import SPLIT_FRACTIONS, Dataset, Sample, generate_dataset, load_dataset
from .scenes import SHAPE_CLASSES, Scene, SceneSpec, ShapeRecord, generate_scene, rasterize
from .shifts import (
    DEFAULT_SHIFT_CHAIN,
    SHIFT_KINDS,
    DomainShift,
    apply_domain_shift,
    apply_shift_chain,
)
from .vocab import VOCAB, WORD_TO_ID, tokenize

__all__ = [
    "DEFAULT_SHIFT_CHAIN",
    "Dataset",
    "DomainShift",
    "SHAPE_CLASSES",
    "SHIFT_KINDS",
    "SPLIT_FRACTIONS",
    "Sample",
    "Scene",
    "SceneSpec",
    "ShapeRecord",
    "VOCAB",
    "WORD_TO_ID",
    "apply_domain_shift",
    "apply_shift_chain",
    "generate_dataset",
    "generate_scene",
    "load_dataset",
    "rasterize",
    "tokenize",
]
