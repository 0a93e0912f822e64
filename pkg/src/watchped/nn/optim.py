"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .tensor import Tensor, ShapeError

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """Optimizer state: per-parameter moment estimates plus hyperparameters."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError(f"betas must lie in (0,1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @classmethod
    def init(cls, params: Mapping[str, Tensor], learning_rate: float = 1e-3,
             beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        state = cls(learning_rate, beta1, beta2, epsilon)
        for name, p in params.items():
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)
        return state


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray],
              state: AdamState) -> tuple[Mapping[str, Tensor], AdamState]:
    """One Adam update over all parameters; increments step_count by one.

    Parameters are updated in place.  A non-finite gradient aborts the whole
    step before any parameter is touched, naming the offending parameter.
    """
    for name in params:
        g = grads[name]
        if g.shape != params[name].data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} != parameter shape {params[name].data.shape} for '{name}'"
            )
        if name not in state.first_moment:
            raise KeyError(f"parameter '{name}' missing from optimizer state")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter '{name}'")

    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
    state.step_count = t
    return params, state
