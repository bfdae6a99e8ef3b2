"""Autodiff module."""

from .tensor import (
    Tensor,
    Parameter,
    ShapeError,
    add,
    mul,
    matmul,
    transpose,
    concat,
    concat_seq,
    gather_rows,
    take_position,
    layer_norm,
    dropout,
    softmax,
    log_softmax,
    cross_entropy,
    mean,
    sum_all,
    gelu,
    scaled_dot_attention,
    feed_forward,
)
from .layers import TransformerConfig, TransformerEncoder
from .optim import Adam, AdamState, GradientOverflowError, adam_step, clip_grad_norm, lr_schedule
from .gradcheck import analytic_gradients, finite_difference_check
from .checkpoint import write_npz, save_checkpoint, load_checkpoint

__all__ = [
    "Tensor",
    "Parameter",
    "ShapeError",
    "add",
    "mul",
    "matmul",
    "transpose",
    "concat",
    "concat_seq",
    "gather_rows",
    "take_position",
    "layer_norm",
    "dropout",
    "softmax",
    "log_softmax",
    "cross_entropy",
    "mean",
    "sum_all",
    "gelu",
    "scaled_dot_attention",
    "feed_forward",
    "TransformerConfig",
    "TransformerEncoder",
    "Adam",
    "AdamState",
    "GradientOverflowError",
    "adam_step",
    "clip_grad_norm",
    "lr_schedule",
    "analytic_gradients",
    "finite_difference_check",
    "write_npz",
    "save_checkpoint",
    "load_checkpoint",
]
