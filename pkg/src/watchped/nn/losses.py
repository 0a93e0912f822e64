"""Binary cross-entropy and sparse categorical cross-entropy."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _lift, clip

__all__ = ["bce_loss", "sparse_cce_loss", "CLAMP_EPS"]

# Probabilities are clamped away from {0,1} so log never sees zero.
CLAMP_EPS = 1e-7


def bce_loss(probability: Tensor | float, label: int) -> Tensor:
    """-[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps]."""
    if label not in (0, 1):
        raise ValueError(f"bce_loss label must be 0 or 1, got {label!r}")
    p = _lift(probability)
    if p.size != 1:
        raise ValueError(f"bce_loss expects a scalar probability, got shape {p.shape}")
    p = clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    if label == 1:
        return -(p.log().sum())
    return -((1.0 - p).log().sum())


def sparse_cce_loss(logits: Tensor, class_index: int) -> Tensor:
    """-ln softmax(logits)[class_index], computed via a stable log-sum-exp."""
    z = _lift(logits)
    if z.ndim != 1 or z.size < 2:
        raise ValueError(f"sparse_cce_loss expects 1-D logits with k >= 2, got shape {z.shape}")
    k = z.size
    if not 0 <= class_index < k:
        raise IndexError(f"class_index {class_index} out of range for {k} classes")
    m = float(np.max(z.data))
    lse = (z - m).exp().sum().log() + m
    return lse - z[class_index]
