"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is built eagerly: every operation returns a new ``Tensor`` holding
the forward value plus a closure that routes the output gradient back to the
operands.  ``backward()`` replays the closures in reverse topological order,
accumulating into ``.grad``, so a tensor consumed twice receives both
contributions.  Everything is 64-bit; gradient-check fidelity is worth more
than speed at the scales this package runs at.
"""

from __future__ import annotations

import contextlib
from typing import Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "no_grad",
    "concat",
    "stack",
    "softmax",
    "clip",
]


class ShapeError(ValueError):
    """Operand shapes cannot be combined; the message reports the dimensions."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure forward evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense float64 array plus reverse-mode bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Seed the output gradient and propagate to every reachable leaf.

        With no argument the tensor must be a scalar (the usual loss case).
        """
        if grad is None:
            if self.data.size != 1:
                raise ValueError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack_: list[tuple[Tensor, bool]] = [(self, False)]
        while stack_:
            node, expanded = stack_.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack_.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack_.append((parent, False))
        self.grad = np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- elementwise arithmetic ----

    def __add__(self, other):
        other = _lift(other)
        out = _node(self.data + other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g, a.data.shape))
                _accum(b, _unbroadcast(g, b.data.shape))
            out._backward = backward
        return out

    def __sub__(self, other):
        other = _lift(other)
        out = _node(self.data - other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g, a.data.shape))
                _accum(b, _unbroadcast(-g, b.data.shape))
            out._backward = backward
        return out

    def __mul__(self, other):
        other = _lift(other)
        out = _node(self.data * other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g * b.data, a.data.shape))
                _accum(b, _unbroadcast(g * a.data, b.data.shape))
            out._backward = backward
        return out

    def __truediv__(self, other):
        other = _lift(other)
        out = _node(self.data / other.data, (self, other))
        if out._parents:
            def backward(g, a=self, b=other):
                _accum(a, _unbroadcast(g / b.data, a.data.shape))
                _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
            out._backward = backward
        return out

    def __neg__(self):
        out = _node(-self.data, (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, -g)
            out._backward = backward
        return out

    def __radd__(self, other):
        return _lift(other).__add__(self)

    def __rsub__(self, other):
        return _lift(other).__sub__(self)

    def __rmul__(self, other):
        return _lift(other).__mul__(self)

    def __rtruediv__(self, other):
        return _lift(other).__truediv__(self)

    # ---- linear algebra ----

    def __matmul__(self, other):
        other = _lift(other)
        a, b = self, other
        an, bn = a.data.ndim, b.data.ndim
        if an == 0 or bn == 0 or an > 2 or bn > 2:
            raise ShapeError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
        if a.data.shape[-1] != b.data.shape[0]:
            raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
        out = _node(a.data @ b.data, (a, b))
        if out._parents:
            def backward(g, a=a, b=b, an=an, bn=bn):
                if an == 2 and bn == 2:
                    _accum(a, g @ b.data.T)
                    _accum(b, a.data.T @ g)
                elif an == 2 and bn == 1:
                    _accum(a, np.outer(g, b.data))
                    _accum(b, a.data.T @ g)
                elif an == 1 and bn == 2:
                    _accum(a, b.data @ g)
                    _accum(b, np.outer(a.data, g))
                else:  # dot product of two vectors
                    _accum(a, g * b.data)
                    _accum(b, g * a.data)
            out._backward = backward
        return out

    def transpose(self) -> "Tensor":
        if self.data.ndim != 2:
            raise ShapeError(f"transpose expects a 2-D tensor, got shape {self.shape}")
        out = _node(self.data.T, (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, g.T)
            out._backward = backward
        return out

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = _node(self.data.reshape(shape), (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, g.reshape(a.data.shape))
            out._backward = backward
        return out

    def __getitem__(self, idx):
        if not isinstance(idx, (int, np.integer, slice)):
            raise TypeError("only integer and slice indexing along axis 0 is supported")
        out = _node(self.data[idx], (self,))
        if out._parents:
            def backward(g, a=self, idx=idx):
                full = np.zeros_like(a.data)
                full[idx] = g
                _accum(a, full)
            out._backward = backward
        return out

    # ---- reductions ----

    def sum(self, axis=None) -> "Tensor":
        out = _node(np.sum(self.data, axis=axis), (self,))
        if out._parents:
            def backward(g, a=self, axis=axis):
                if axis is None:
                    _accum(a, np.broadcast_to(g, a.data.shape).copy())
                else:
                    _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())
            out._backward = backward
        return out

    def mean(self, axis=None) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    # ---- pointwise nonlinearities ----

    def exp(self) -> "Tensor":
        value = np.exp(self.data)
        out = _node(value, (self,))
        if out._parents:
            def backward(g, a=self, value=value):
                _accum(a, g * value)
            out._backward = backward
        return out

    def log(self) -> "Tensor":
        out = _node(np.log(self.data), (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, g / a.data)
            out._backward = backward
        return out

    def tanh(self) -> "Tensor":
        value = np.tanh(self.data)
        out = _node(value, (self,))
        if out._parents:
            def backward(g, a=self, value=value):
                _accum(a, g * (1.0 - value * value))
            out._backward = backward
        return out

    def sigmoid(self) -> "Tensor":
        value = _sigmoid(self.data)
        out = _node(value, (self,))
        if out._parents:
            def backward(g, a=self, value=value):
                _accum(a, g * value * (1.0 - value))
            out._backward = backward
        return out

    def relu(self) -> "Tensor":
        out = _node(np.maximum(self.data, 0.0), (self,))
        if out._parents:
            def backward(g, a=self):
                _accum(a, g * (a.data > 0.0))
            out._backward = backward
        return out

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data: np.ndarray, parents: tuple[Tensor, ...]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Piecewise form avoids exp overflow for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; the gradient is split back by size."""
    tensors = [_lift(t) for t in tensors]
    out = _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out._parents:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward(g, tensors=tensors, offsets=offsets, axis=axis):
            index: list = [slice(None)] * g.ndim
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                index[axis] = slice(lo, hi)
                _accum(t, g[tuple(index)])
        out._backward = backward
    return out


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Stack equal-shape tensors along a new leading axis."""
    tensors = [_lift(t) for t in tensors]
    out = _node(np.stack([t.data for t in tensors]), tuple(tensors))
    if out._parents:
        def backward(g, tensors=tensors):
            for i, t in enumerate(tensors):
                _accum(t, g[i])
        out._backward = backward
    return out


def softmax(t: Tensor) -> Tensor:
    """Numerically stable softmax of a 1-D tensor.

    Outputs are nonnegative and sum to 1 (to machine precision).
    """
    t = _lift(t)
    if t.data.ndim != 1:
        raise ShapeError(f"softmax expects a 1-D tensor, got shape {t.shape}")
    shifted = np.exp(t.data - t.data.max())
    value = shifted / shifted.sum()
    out = _node(value, (t,))
    if out._parents:
        def backward(g, t=t, value=value):
            _accum(t, value * (g - np.dot(g, value)))
        out._backward = backward
    return out


def clip(t: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; the gradient is zero where clamping binds."""
    t = _lift(t)
    out = _node(np.clip(t.data, lo, hi), (t,))
    if out._parents:
        def backward(g, t=t, lo=lo, hi=hi):
            _accum(t, g * ((t.data > lo) & (t.data < hi)))
        out._backward = backward
    return out
