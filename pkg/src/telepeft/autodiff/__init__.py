from .gradcheck import finite_difference_check
from .rng import RngStream
from .serialize import (
    FORMAT_VERSION,
    load_model_dir,
    load_tensor,
    save_model_dir,
    save_tensor,
)
from .tensor import (
    affine,
    BatchNormState,
    Tensor,
    add,
    batch_norm2d,
    bce_with_logits,
    concat,
    conv2d,
    default_dtype,
    div,
    dropout,
    embedding,
    layer_norm,
    matmul,
    mul,
    no_grad,
    ones,
    parameter,
    power,
    reshape,
    scale,
    set_default_dtype,
    sigmoid,
    silu,
    softmax,
    sub,
    take_rows,
    tmean,
    transpose,
    tsum,
    upsample2x,
    zeros,
)

__all__ = [
    "BatchNormState",
    "FORMAT_VERSION",
    "RngStream",
    "Tensor",
    "add",
    "affine",
    "batch_norm2d",
    "bce_with_logits",
    "concat",
    "conv2d",
    "default_dtype",
    "div",
    "dropout",
    "embedding",
    "finite_difference_check",
    "layer_norm",
    "load_model_dir",
    "load_tensor",
    "matmul",
    "mul",
    "no_grad",
    "ones",
    "parameter",
    "power",
    "reshape",
    "save_model_dir",
    "save_tensor",
    "scale",
    "set_default_dtype",
    "sigmoid",
    "silu",
    "softmax",
    "sub",
    "take_rows",
    "tmean",
    "transpose",
    "tsum",
    "upsample2x",
    "zeros",
]
