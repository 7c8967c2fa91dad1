from . import ops
from .ops import (
    COSINE_EPS,
    add,
    broadcast_to,
    concat,
    cosine,
    cosine_matrix,
    entropy,
    gelu,
    layer_norm,
    log,
    matmul,
    mul,
    reshape,
    scale,
    softmax,
    sub,
    take,
    transpose,
)
from .tensor import DTYPE, GradientMap, Parameter, Tape, Tensor, active_tape, backward, constant, frozen_array
