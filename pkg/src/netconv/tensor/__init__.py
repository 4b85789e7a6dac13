from netconv.tensor.core import DEFAULT_DTYPE, Tape, Tensor, backward, grad_enabled, no_grad
from netconv.tensor.gradcheck import grad_check, relative_error
from netconv.tensor.ops import (
    add,
    cross_entropy,
    depthwise_conv,
    elementwise_mul,
    embedding_lookup,
    gather_positions,
    gelu,
    layer_norm,
    linear,
    max_pool_over_sequence,
    mean_pool_over_sequence,
    mul,
    relu,
    scored_depthwise_conv,
    sigmoid,
    softmax,
    sum_all,
)

__all__ = [
    "DEFAULT_DTYPE",
    "Tape",
    "Tensor",
    "add",
    "backward",
    "cross_entropy",
    "depthwise_conv",
    "elementwise_mul",
    "embedding_lookup",
    "gather_positions",
    "gelu",
    "grad_check",
    "grad_enabled",
    "layer_norm",
    "linear",
    "max_pool_over_sequence",
    "mean_pool_over_sequence",
    "mul",
    "no_grad",
    "relative_error",
    "relu",
    "scored_depthwise_conv",
    "sigmoid",
    "softmax",
    "sum_all",
]
