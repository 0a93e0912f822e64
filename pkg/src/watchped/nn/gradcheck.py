"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from .tensor import Tensor, no_grad

__all__ = ["grad_check"]


def grad_check(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor],
               epsilon: float = 1e-5, max_coords_per_param: int | None = None,
               seed: int = 0) -> float:
    """Compare reverse-mode gradients against (f(x+e)-f(x-e))/2e per coordinate.

    ``loss_fn`` must be a deterministic closure over ``params`` returning a
    scalar tensor (dropout off).  Returns the worst relative error, with the
    denominator max(|analytic|, |numeric|, 1e-8).  When a parameter has more
    coordinates than ``max_coords_per_param``, a seeded subset is checked;
    by default every coordinate is.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    if loss.size != 1:
        raise ValueError(f"loss_fn must return a scalar, got shape {loss.shape}")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            ana = analytic[name].reshape(-1)
            coords: Iterable[int]
            if max_coords_per_param is not None and flat.size > max_coords_per_param:
                coords = np.sort(rng.choice(flat.size, max_coords_per_param, replace=False))
            else:
                coords = range(flat.size)
            for i in coords:
                orig = flat[i]
                flat[i] = orig + epsilon
                f_plus = float(loss_fn().data)
                flat[i] = orig - epsilon
                f_minus = float(loss_fn().data)
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * epsilon)
                err = abs(ana[i] - numeric) / max(abs(ana[i]), abs(numeric), 1e-8)
                if err > worst:
                    worst = err
    return worst
