"""Numeric core: float64 tensors, reverse-mode autodiff, layers, Adam."""

from .tensor import Tensor, ShapeError, no_grad, concat, stack, softmax, clip
from .layers import (
    conv2d,
    conv1d,
    pool2d,
    pool1d,
    dense,
    dropout,
    GruParams,
    gru_forward,
    AttentionParams,
    attention_block,
)
from .losses import bce_loss, sparse_cce_loss, CLAMP_EPS
from .optim import AdamState, adam_step
from .gradcheck import grad_check
from .serialize import save_weights, load_weights, FORMAT_VERSION

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "concat",
    "stack",
    "softmax",
    "clip",
    "conv2d",
    "conv1d",
    "pool2d",
    "pool1d",
    "dense",
    "dropout",
    "GruParams",
    "gru_forward",
    "AttentionParams",
    "attention_block",
    "bce_loss",
    "sparse_cce_loss",
    "CLAMP_EPS",
    "AdamState",
    "adam_step",
    "grad_check",
    "save_weights",
    "load_weights",
    "FORMAT_VERSION",
]
