"""Layer set: 2-D/1-D convolution, pooling, dense, GRU, additive attention.

Convolutions are computed by an im2col gather followed by one matrix multiply;
the gather indices are cached per shape.  The nested-loop definitions live in
the test suite as oracles, deliberately independent of this code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .tensor import Tensor, ShapeError, _accum, _lift, _node, concat, softmax, stack

__all__ = [
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
]

_ACTIVATIONS = ("none", "relu", "sigmoid", "tanh")

# im2col gather indices keyed by (C, H, W, kh, kw, sh, sw, ph, pw)
_COL_CACHE: dict[tuple, tuple[np.ndarray, tuple[int, int]]] = {}
# batched variant keyed by (base key, N)
_BATCH_COL_CACHE: dict[tuple, np.ndarray] = {}


def _pair(v) -> tuple[int, int]:
    return (v, v) if isinstance(v, int) else (int(v[0]), int(v[1]))


def _col_indices(C, H, W, kh, kw, sh, sw, ph, pw):
    key = (C, H, W, kh, kw, sh, sw, ph, pw)
    cached = _COL_CACHE.get(key)
    if cached is not None:
        return cached
    Hp, Wp = H + 2 * ph, W + 2 * pw
    Ho = (Hp - kh) // sh + 1
    Wo = (Wp - kw) // sw + 1
    grid = np.arange(C * Hp * Wp, dtype=np.int64).reshape(C, Hp, Wp)
    s0, s1, s2 = grid.strides
    windows = as_strided(
        grid,
        shape=(C, kh, kw, Ho, Wo),
        strides=(s0, s1, s2, s1 * sh, s2 * sw),
    )
    idx = np.ascontiguousarray(windows.reshape(C * kh * kw, Ho * Wo))
    _COL_CACHE[key] = (idx, (Ho, Wo))
    return idx, (Ho, Wo)


def conv2d(input: Tensor, kernels: Tensor, stride=1, padding=0) -> Tensor:
    """Cross-correlate ``input`` [C,H,W] with ``kernels`` [C_out,C,kH,kW].

    Output is [C_out,H',W'] with H' = floor((H+2p-kH)/s)+1.  A leading batch
    axis on the input ([N,C,H,W]) is accepted and carried through.  Zero
    padding; stride >= 1.
    """
    x, k = _lift(input), _lift(kernels)
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    if sh < 1 or sw < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {(sh, sw)}")
    if ph < 0 or pw < 0:
        raise ValueError(f"conv2d padding must be >= 0, got {(ph, pw)}")
    if k.ndim != 4:
        raise ShapeError(f"conv2d kernels must be 4-D [C_out,C_in,kH,kW], got {k.shape}")
    batched = x.ndim == 4
    if x.ndim not in (3, 4):
        raise ShapeError(f"conv2d input must be [C,H,W] or [N,C,H,W], got {x.shape}")
    C, H, W = x.shape[-3:]
    C_out, C_in, kh, kw = k.shape
    if C != C_in:
        raise ShapeError(
            f"conv2d channel mismatch: input has {C} channels {x.shape}, kernels expect {C_in} {k.shape}"
        )
    if kh > H + 2 * ph or kw > W + 2 * pw:
        raise ShapeError(
            f"conv2d kernel {kh}x{kw} larger than padded input {H + 2 * ph}x{W + 2 * pw}"
        )

    idx, (Ho, Wo) = _col_indices(C, H, W, kh, kw, sh, sw, ph, pw)
    pad_spec = ((0, 0),) * (x.ndim - 2) + ((ph, ph), (pw, pw))
    padded = np.pad(x.data, pad_spec) if (ph or pw) else x.data
    wmat = k.data.reshape(C_out, -1)
    if batched:
        # Gather into [K, N*Ho*Wo] so one plain 2-D matmul covers the batch
        # (numpy's broadcast matmul path avoids BLAS and is far slower).
        N = x.shape[0]
        per = int(np.prod(padded.shape[1:]))
        cache_key = (C, H, W, kh, kw, sh, sw, ph, pw, N)
        big_idx = _BATCH_COL_CACHE.get(cache_key)
        if big_idx is None:
            big_idx = idx[:, None, :] + (np.arange(N, dtype=np.int64) * per)[None, :, None]
            big_idx = np.ascontiguousarray(big_idx.reshape(idx.shape[0], N * Ho * Wo))
            _BATCH_COL_CACHE[cache_key] = big_idx
        cols = padded.reshape(-1)[big_idx]
        out_data = np.ascontiguousarray(
            (wmat @ cols).reshape(C_out, N, Ho * Wo).transpose(1, 0, 2)
        ).reshape(N, C_out, Ho, Wo)
    else:
        big_idx = idx
        cols = padded.reshape(-1)[idx]                 # [C*kh*kw, Ho*Wo]
        out_data = (wmat @ cols).reshape(C_out, Ho, Wo)

    out = _node(out_data, (x, k))
    if out._parents:
        pad_shape = padded.shape

        def backward(g, x=x, k=k, cols=cols, big_idx=big_idx, wmat=wmat,
                     pad_shape=pad_shape, batched=batched):
            if batched:
                N = pad_shape[0]
                gflat = np.ascontiguousarray(
                    g.reshape(N, k.shape[0], -1).transpose(1, 0, 2)
                ).reshape(k.shape[0], -1)
            else:
                gflat = g.reshape(k.shape[0], -1)
            dk = (gflat @ cols.T).reshape(k.data.shape)
            dcols = wmat.T @ gflat
            dpad = np.bincount(big_idx.reshape(-1), weights=dcols.reshape(-1),
                               minlength=int(np.prod(pad_shape))).reshape(pad_shape)
            if ph or pw:
                sl = (Ellipsis, slice(ph, ph + x.shape[-2]), slice(pw, pw + x.shape[-1]))
                dpad = dpad[sl]
            _accum(x, dpad)
            _accum(k, dk)
        out._backward = backward
    return out


def conv1d(input: Tensor, kernels: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """1-D convolution over time: input [T,C_in], kernels [C_out,C_in,k] -> [T',C_out]."""
    x, k = _lift(input), _lift(kernels)
    if x.ndim != 2:
        raise ShapeError(f"conv1d input must be [T,C], got {x.shape}")
    if k.ndim != 3:
        raise ShapeError(f"conv1d kernels must be [C_out,C_in,k], got {k.shape}")
    T, C = x.shape
    C_out, C_in, kw = k.shape
    planes = x.transpose().reshape(C, 1, T)
    k4 = k.reshape(C_out, C_in, 1, kw)
    out = conv2d(planes, k4, stride=(1, stride), padding=(0, padding))
    return out.reshape(C_out, -1).transpose()


def pool2d(input: Tensor, mode: str, kh: int, kw: int) -> Tensor:
    """Non-overlapping max/average pooling (stride equals the kernel).

    Trailing rows/columns that do not fill a window are dropped.  With
    kh == H and kw == W the spatial dimensions collapse to 1x1.
    """
    x = _lift(input)
    if mode not in ("max", "average"):
        raise ValueError(f"pool2d mode must be 'max' or 'average', got {mode!r}")
    if x.ndim not in (3, 4):
        raise ShapeError(f"pool2d input must be [C,H,W] or [N,C,H,W], got {x.shape}")
    H, W = x.shape[-2:]
    if kh > H or kw > W:
        raise ShapeError(f"pool2d kernel {kh}x{kw} larger than input {H}x{W}")
    H2, W2 = H // kh, W // kw
    lead = x.shape[:-2]
    cropped = x.data[..., : H2 * kh, : W2 * kw]
    tiles = cropped.reshape(*lead, H2, kh, W2, kw)
    tiles = np.moveaxis(tiles, -3, -2).reshape(*lead, H2, W2, kh * kw)

    if mode == "average":
        out_data = tiles.mean(axis=-1)
    else:
        out_data = tiles.max(axis=-1)
        argmax = tiles.argmax(axis=-1)

    out = _node(out_data, (x,))
    if out._parents:
        def backward(g, x=x, kh=kh, kw=kw, H2=H2, W2=W2, lead=lead, mode=mode):
            if mode == "average":
                dtiles = np.repeat(g[..., None], kh * kw, axis=-1) / (kh * kw)
            else:
                dtiles = np.zeros((*lead, H2, W2, kh * kw))
                np.put_along_axis(dtiles, argmax[..., None], g[..., None], axis=-1)
            dtiles = np.moveaxis(dtiles.reshape(*lead, H2, W2, kh, kw), -2, -3)
            dx = np.zeros_like(x.data)
            dx[..., : H2 * kh, : W2 * kw] = dtiles.reshape(*lead, H2 * kh, W2 * kw)
            _accum(x, dx)
        out._backward = backward
    return out


def pool1d(input: Tensor, mode: str, k: int) -> Tensor:
    """Non-overlapping pooling over time for a [T,C] tensor."""
    x = _lift(input)
    if mode not in ("max", "average"):
        raise ValueError(f"pool1d mode must be 'max' or 'average', got {mode!r}")
    if x.ndim != 2:
        raise ShapeError(f"pool1d input must be [T,C], got {x.shape}")
    T, C = x.shape
    if k > T:
        raise ShapeError(f"pool1d kernel {k} larger than sequence length {T}")
    T2 = T // k
    tiles = x.data[: T2 * k].reshape(T2, k, C)
    if mode == "average":
        out_data = tiles.mean(axis=1)
    else:
        out_data = tiles.max(axis=1)
        argmax = tiles.argmax(axis=1)

    out = _node(out_data, (x,))
    if out._parents:
        def backward(g, x=x, k=k, T2=T2, C=C, mode=mode):
            dtiles = np.zeros((T2, k, C))
            if mode == "average":
                dtiles += g[:, None, :] / k
            else:
                np.put_along_axis(dtiles, argmax[:, None, :], g[:, None, :], axis=1)
            dx = np.zeros_like(x.data)
            dx[: T2 * k] = dtiles.reshape(T2 * k, C)
            _accum(x, dx)
        out._backward = backward
    return out


def dense(input: Tensor, weights: Tensor, bias: Tensor, activation: str = "none") -> Tensor:
    """Fully connected layer: activation(W @ x + b) for a 1-D input."""
    x, w, b = _lift(input), _lift(weights), _lift(bias)
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}, expected one of {_ACTIVATIONS}")
    if x.ndim != 1 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(f"dense expects x[n], W[m,n], b[m]; got {x.shape}, {w.shape}, {b.shape}")
    if w.shape[1] != x.shape[0] or w.shape[0] != b.shape[0]:
        raise ShapeError(f"dense shape mismatch: x{x.shape}, W{w.shape}, b{b.shape}")
    z = w @ x + b
    if activation == "relu":
        return z.relu()
    if activation == "sigmoid":
        return z.sigmoid()
    if activation == "tanh":
        return z.tanh()
    return z


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

    Callers apply this in training mode only; evaluation never calls it.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0,1), got {p}")
    if p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * Tensor(mask)


@dataclass
class GruParams:
    """Per-gate weights of one GRU: update (z), reset (r) and candidate gates.

    Input-to-hidden matrices are [hidden, input], hidden-to-hidden matrices
    [hidden, hidden], biases [hidden].
    """

    input_size: int
    hidden_size: int
    w_update: Tensor
    u_update: Tensor
    b_update: Tensor
    w_reset: Tensor
    u_reset: Tensor
    b_reset: Tensor
    w_cand: Tensor
    u_cand: Tensor
    b_cand: Tensor

    def __post_init__(self):
        i, h = self.input_size, self.hidden_size
        for name in ("w_update", "w_reset", "w_cand"):
            if getattr(self, name).shape != (h, i):
                raise ShapeError(f"{name} must be [{h},{i}], got {getattr(self, name).shape}")
        for name in ("u_update", "u_reset", "u_cand"):
            if getattr(self, name).shape != (h, h):
                raise ShapeError(f"{name} must be [{h},{h}], got {getattr(self, name).shape}")
        for name in ("b_update", "b_reset", "b_cand"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"{name} must be [{h}], got {getattr(self, name).shape}")

    @classmethod
    def init(cls, rng: np.random.Generator, input_size: int, hidden_size: int) -> "GruParams":
        def wmat(rows, cols):
            return Tensor(rng.normal(0.0, 1.0 / np.sqrt(cols), (rows, cols)), requires_grad=True)

        def bvec(n):
            # Tiny random bias keeps gates off exact saturation kinks at init.
            return Tensor(rng.uniform(-0.01, 0.01, n), requires_grad=True)

        i, h = input_size, hidden_size
        return cls(i, h, wmat(h, i), wmat(h, h), bvec(h),
                   wmat(h, i), wmat(h, h), bvec(h),
                   wmat(h, i), wmat(h, h), bvec(h))

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "GruParams":
        i, h = input_size, hidden_size
        mk = lambda *s: Tensor(np.zeros(s), requires_grad=True)
        return cls(i, h, mk(h, i), mk(h, h), mk(h),
                   mk(h, i), mk(h, h), mk(h),
                   mk(h, i), mk(h, h), mk(h))

    def named(self, prefix: str):
        for field in ("w_update", "u_update", "b_update", "w_reset", "u_reset",
                      "b_reset", "w_cand", "u_cand", "b_cand"):
            yield f"{prefix}.{field}", getattr(self, field)


def gru_forward(sequence: Tensor, params: GruParams, h0: Tensor | None = None) -> Tensor:
    """Run a GRU over [T, input_size], returning hidden states [T, hidden_size].

    Gate convention (fixed; the tests pin it):

        z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
        r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
        c_t = tanh(Wc x_t + Uc (r_t * h_{t-1}) + bc)
        h_t = (1 - z_t) * c_t + z_t * h_{t-1}

    i.e. the update gate scales the carried-over previous state and the reset
    gate is applied to the previous state before the recurrent matrix.
    """
    seq = _lift(sequence)
    if seq.ndim != 2:
        raise ShapeError(f"gru_forward expects [T, input_size], got {seq.shape}")
    T, n = seq.shape
    if T < 1:
        raise ValueError("gru_forward: empty sequence")
    if n != params.input_size:
        raise ShapeError(f"gru_forward input width {n} != params.input_size {params.input_size}")
    h = h0 if h0 is not None else Tensor(np.zeros(params.hidden_size))
    if h.shape != (params.hidden_size,):
        raise ShapeError(f"h0 must be [{params.hidden_size}], got {h.shape}")
    outputs = []
    for t in range(T):
        x = seq[t]
        z = (params.w_update @ x + params.u_update @ h + params.b_update).sigmoid()
        r = (params.w_reset @ x + params.u_reset @ h + params.b_reset).sigmoid()
        c = (params.w_cand @ x + params.u_cand @ (r * h) + params.b_cand).tanh()
        h = (1.0 - z) * c + z * h
        outputs.append(h)
    return stack(outputs)


@dataclass
class AttentionParams:
    """Additive attention: scores v . tanh(W h_t) over a sequence of vectors."""

    dim: int
    w: Tensor
    v: Tensor

    def __post_init__(self):
        if self.w.shape != (self.dim, self.dim) or self.v.shape != (self.dim,):
            raise ShapeError(f"attention params for dim {self.dim} got W{self.w.shape}, v{self.v.shape}")

    @classmethod
    def init(cls, rng: np.random.Generator, dim: int) -> "AttentionParams":
        w = Tensor(rng.normal(0.0, 1.0 / np.sqrt(dim), (dim, dim)), requires_grad=True)
        v = Tensor(rng.normal(0.0, 1.0 / np.sqrt(dim), dim), requires_grad=True)
        return cls(dim, w, v)

    @classmethod
    def zeros(cls, dim: int) -> "AttentionParams":
        return cls(dim, Tensor(np.zeros((dim, dim)), requires_grad=True),
                   Tensor(np.zeros(dim), requires_grad=True))

    def named(self, prefix: str):
        yield f"{prefix}.w", self.w
        yield f"{prefix}.v", self.v


def attention_block(sequence: Tensor, params: AttentionParams) -> Tensor:
    """Collapse [T,d] to [d] by softmax-weighted summation.

    Weights alpha = softmax(tanh(H W^T) v) are a convex combination, so a
    sequence of identical rows returns that row unchanged.
    """
    seq = _lift(sequence)
    if seq.ndim != 2:
        raise ShapeError(f"attention_block expects [T,d], got {seq.shape}")
    if seq.shape[1] != params.dim:
        raise ShapeError(f"attention dim mismatch: sequence {seq.shape} vs params dim {params.dim}")
    scores = (seq @ params.w.transpose()).tanh() @ params.v
    alpha = softmax(scores)
    return seq.transpose() @ alpha
