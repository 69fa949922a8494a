"""Minimal tensor library with reverse-mode autodiff and Adam."""

from .checkpoint import load_checkpoint, save_checkpoint
from .ops import (
    add,
    bmm,
    concat,
    conv2d,
    cross_entropy_loss,
    dense,
    global_avg_pool,
    inner_product,
    log_softmax,
    maxpool2d,
    mean,
    mul,
    relu,
    reshape,
    scale,
    softmax,
    sub,
    total,
    transpose,
)
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, as_tensor, backward, no_grad

__all__ = [
    "Adam", "AdamState", "Tape", "Tensor", "adam_step", "add", "as_tensor", "backward", "bmm",
    "concat", "conv2d", "cross_entropy_loss", "dense", "global_avg_pool", "inner_product",
    "load_checkpoint", "log_softmax", "maxpool2d", "mean", "mul", "no_grad", "relu", "reshape",
    "save_checkpoint", "scale", "softmax", "sub", "total", "transpose",
]
