"""Minimal dense-tensor math: reverse-mode autodiff, Adam, gradient oracle, LGT1 I/O."""

from .gradcheck import finite_difference_gradient, max_relative_error
from .lgt import MalformedTensorError, encode_tensor, load_tensor, read_tensor, save_tensor, write_tensor
from .optim import Adam, AdamState, adam_step
from .rng import derive_seed, make_rng, split_rng
from .tensor import (
    ShapeError,
    Tensor,
    add,
    arccos,
    as_tensor,
    broadcast_to,
    clip,
    concat,
    div,
    exp,
    grad,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    sin,
    softplus,
    sqrt,
    square,
    sub,
    tanh,
    transpose,
    tsum,
    where,
)
