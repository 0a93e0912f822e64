"""Branch forwards and fusion.

Non-vision: pose -> GRU, +bbox -> GRU, +vehicle speed -> GRU, attention.
Vision: per-frame conv stack -> full-map average pool -> GRU -> attention,
independently for local and global context, concatenated.
Sensor: activity distribution from the raw motion window, broadcast over the
frame axis and concatenated with direction features into a temporal conv
encoder.  Initial fusion stacks the vision and non-vision vectors as a
two-step sequence under attention; final fusion concatenates with the sensor
vector into an FC + sigmoid head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..nn import Tensor
from ..data.types import ModelInput
from .config import ArchConfig
from .params import Cnn1Params, Cnn2Params, ModelParams

__all__ = [
    "MODES",
    "RunContext",
    "FeatureVector",
    "CrossingPrediction",
    "non_vision_forward",
    "vision_forward",
    "sensor_cnn1_forward",
    "sensor_cnn1_logits",
    "sensor_cnn2_encode",
    "sensor_cnn2_logits",
    "sensor_branch_forward",
    "initial_fusion",
    "final_fusion",
    "window_probability",
    "predict",
]

MODES = ("full", "vision_only", "sensor_only")
_EVAL = None


@dataclass(frozen=True)
class RunContext:
    """Forward-pass mode: dropout is active only when training with rng set."""

    training: bool = False
    dropout: float = 0.0
    rng: np.random.Generator | None = None

    def drop(self, x: Tensor) -> Tensor:
        if self.training and self.dropout > 0.0 and self.rng is not None:
            return nn.dropout(x, self.dropout, self.rng)
        return x


def _eval_ctx() -> RunContext:
    global _EVAL
    if _EVAL is None:
        _EVAL = RunContext()
    return _EVAL


@dataclass(frozen=True)
class FeatureVector:
    """A branch output tagged with its origin."""

    values: Tensor
    origin: str  # "vision" | "non_vision" | "sensor" | "fused"

    def __post_init__(self):
        if self.origin not in ("vision", "non_vision", "sensor", "fused"):
            raise ValueError(f"unknown feature origin {self.origin!r}")


@dataclass(frozen=True)
class CrossingPrediction:
    """Final decision for one window.

    ``abstained`` marks windows with no usable box track; those carry
    probability 0.0 and predict not_crossing.
    """

    probability: float
    predicted: str
    threshold: float
    abstained: bool = False

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0,1]")
        want = "crossing" if (self.probability >= self.threshold and not self.abstained) \
            else "not_crossing"
        if self.predicted != want:
            raise ValueError(f"prediction {self.predicted!r} inconsistent with "
                             f"p={self.probability}, threshold={self.threshold}")


def _prediction(probability: float, threshold: float, abstained: bool = False) -> CrossingPrediction:
    predicted = "crossing" if (probability >= threshold and not abstained) else "not_crossing"
    return CrossingPrediction(probability, predicted, threshold, abstained)


# ---- input normalization (raw units -> dimensionless, outside the graph) ----

def _norm_pose(pose: np.ndarray, mask: np.ndarray, cfg: ArchConfig) -> np.ndarray:
    scale = np.tile([1.0 / cfg.frame_w, 1.0 / cfg.frame_h], 18)
    return pose * scale * mask[:, None]


def _norm_bbox(bbox: np.ndarray, cfg: ArchConfig) -> np.ndarray:
    return bbox / np.array([cfg.frame_w, cfg.frame_h, cfg.frame_w, cfg.frame_h])


def _norm_direction(direction: np.ndarray, cfg: ArchConfig) -> np.ndarray:
    return direction / np.array([cfg.bearing_scale, cfg.dir_speed_scale,
                                 cfg.bbox_delta_scale, cfg.bbox_delta_scale])


def _norm_sensor(sensor: np.ndarray, cfg: ArchConfig) -> np.ndarray:
    return sensor / np.array([cfg.accel_scale] * 3 + [cfg.gyro_scale] * 3)


def non_vision_forward(pose: np.ndarray, pose_mask: np.ndarray, bbox: np.ndarray,
                       speed: np.ndarray, params: ModelParams,
                       ctx: RunContext | None = None) -> FeatureVector:
    """Pose, box track and ego speed through the stacked GRUs and attention.

    Masked pose rows are zeroed before the first GRU.
    """
    cfg = params.config
    ctx = ctx or _eval_ctx()
    pose_t = Tensor(_norm_pose(pose, pose_mask, cfg))
    h1 = nn.gru_forward(pose_t, params.gru_pose)
    h2 = nn.gru_forward(nn.concat([h1, Tensor(_norm_bbox(bbox, cfg))], axis=1), params.gru_traj)
    h3 = nn.gru_forward(nn.concat([h2, Tensor(speed / cfg.speed_scale)], axis=1), params.gru_ctx)
    v = ctx.drop(nn.attention_block(h3, params.attn_nv))
    return FeatureVector(v, "non_vision")


def _context_features(frames: np.ndarray, convs, gru, attn, ctx: RunContext) -> Tensor:
    # frames [m,H,W,3] in [0,1] -> [m,3,H,W] -> conv stages -> GAP -> GRU -> attention
    x = Tensor(np.ascontiguousarray(frames.transpose(0, 3, 1, 2)))
    for layer in convs:
        x = (nn.conv2d(x, layer.kernels, stride=1, padding=1)
             + layer.bias.reshape(-1, 1, 1)).relu()
        x = nn.pool2d(x, "max", 2, 2)
    h, w = x.shape[-2:]
    pooled = nn.pool2d(x, "average", h, w).reshape(frames.shape[0], -1)
    seq = nn.gru_forward(pooled, gru)
    return ctx.drop(nn.attention_block(seq, attn))


def vision_forward(local_ctx: np.ndarray, global_ctx: np.ndarray, params: ModelParams,
                   ctx: RunContext | None = None) -> FeatureVector:
    """Local and global context, each conv->GRU->attention, concatenated."""
    ctx = ctx or _eval_ctx()
    local_v = _context_features(local_ctx, params.local_convs, params.local_gru,
                                params.local_attn, ctx)
    global_v = _context_features(global_ctx, params.global_convs, params.global_gru,
                                 params.global_attn, ctx)
    return FeatureVector(nn.concat([local_v, global_v]), "vision")


def pooled_context_sequence(frames: np.ndarray, params: ModelParams) -> Tensor:
    """Per-frame pooled conv features [m, cnn_feature_dim] (no recurrence)."""
    x = Tensor(np.ascontiguousarray(frames.transpose(0, 3, 1, 2)))
    for layer in params.local_convs:
        x = (nn.conv2d(x, layer.kernels, stride=1, padding=1)
             + layer.bias.reshape(-1, 1, 1)).relu()
        x = nn.pool2d(x, "max", 2, 2)
    h, w = x.shape[-2:]
    return nn.pool2d(x, "average", h, w).reshape(frames.shape[0], -1)


def sensor_cnn1_logits(sensor_window: np.ndarray, cnn1: Cnn1Params, cfg: ArchConfig) -> Tensor:
    if sensor_window.shape != (cfg.cnn1_frame, 6):
        raise nn.ShapeError(
            f"activity window must be [{cfg.cnn1_frame},6], got {sensor_window.shape}"
        )
    x = Tensor(_norm_sensor(sensor_window, cfg))
    for layer in cnn1.layers:
        x = (nn.conv1d(x, layer.kernels) + layer.bias).relu()
        x = nn.pool1d(x, "max", cfg.cnn1_pool)
    flat = x.reshape(-1)
    return cnn1.head_w @ flat + cnn1.head_b


def sensor_cnn1_forward(sensor_window: np.ndarray, cnn1: Cnn1Params,
                        cfg: ArchConfig) -> Tensor:
    """Class distribution over {standing, walking, jogging}; sums to one."""
    return nn.softmax(sensor_cnn1_logits(sensor_window, cnn1, cfg))


def sensor_cnn2_encode(features: Tensor, cnn2: Cnn2Params) -> Tensor:
    """Temporal conv stack over [T, activity+direction] features, pooled to a vector.

    The global average over time keeps the encoder usable on training windows
    and observation windows of different lengths.
    """
    x = features
    for layer in cnn2.layers:
        pad = (layer.kernels.shape[2] - 1) // 2
        x = (nn.conv1d(x, layer.kernels, padding=pad) + layer.bias).relu()
    return x.mean(axis=0)


def sensor_cnn2_logits(features: Tensor, cnn2: Cnn2Params) -> Tensor:
    v = sensor_cnn2_encode(features, cnn2)
    return cnn2.head_w @ v + cnn2.head_b


def sensor_branch_forward(sensor_window: np.ndarray, direction: np.ndarray,
                          params: ModelParams, ctx: RunContext | None = None) -> FeatureVector:
    """Activity distribution broadcast over frames, joined with direction features."""
    cfg = params.config
    dist = sensor_cnn1_forward(sensor_window, params.cnn1, cfg)
    m = direction.shape[0]
    tiled = Tensor(np.ones((m, 1))) @ dist.reshape(1, -1)
    joined = nn.concat([tiled, Tensor(_norm_direction(direction, cfg))], axis=1)
    return FeatureVector(sensor_cnn2_encode(joined, params.cnn2), "sensor")


def initial_fusion(v_v: FeatureVector, v_nv: FeatureVector, params: ModelParams,
                   ctx: RunContext | None = None) -> FeatureVector:
    """Attention over the stacked (vision, non-vision) pair."""
    ctx = ctx or _eval_ctx()
    if v_v.origin != "vision" or v_nv.origin != "non_vision":
        raise ValueError(f"initial_fusion got origins {v_v.origin!r}, {v_nv.origin!r}")
    if v_v.values.shape != v_nv.values.shape:
        raise nn.ShapeError(
            f"fusion inputs must share a dimension, got {v_v.values.shape} and {v_nv.values.shape}"
        )
    pair = nn.stack([v_v.values, v_nv.values])
    return FeatureVector(ctx.drop(nn.attention_block(pair, params.attn_fusion)), "fused")


def final_fusion(fused: FeatureVector, v_s: FeatureVector, params: ModelParams) -> Tensor:
    """Concatenate, FC, sigmoid; returns the probability as a graph tensor."""
    if fused.origin != "fused" or v_s.origin != "sensor":
        raise ValueError(f"final_fusion got origins {fused.origin!r}, {v_s.origin!r}")
    x = nn.concat([fused.values, v_s.values])
    return nn.dense(x, params.fc_w, params.fc_b, "sigmoid")


def window_probability(inp: ModelInput, params: ModelParams, mode: str = "full",
                       ctx: RunContext | None = None) -> Tensor:
    """Crossing probability for one window as a differentiable scalar [1]."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    ctx = ctx or _eval_ctx()
    cfg = params.config
    if mode == "sensor_only":
        fused = FeatureVector(Tensor(np.zeros(cfg.fusion_dim)), "fused")
    else:
        v_nv = non_vision_forward(inp.pose, inp.pose_mask, inp.bbox, inp.speed, params, ctx)
        v_v = vision_forward(inp.local_ctx, inp.global_ctx, params, ctx)
        fused = initial_fusion(v_v, v_nv, params, ctx)
    if mode == "vision_only":
        v_s = FeatureVector(Tensor(np.zeros(cfg.sensor_feature_dim)), "sensor")
    else:
        v_s = sensor_branch_forward(inp.sensor, inp.direction, params, ctx)
    return final_fusion(fused, v_s, params)


def predict(inp: ModelInput, params: ModelParams, mode: str = "full",
            threshold: float | None = None) -> CrossingPrediction:
    """Evaluate one window; abstains when the window has no box track at all."""
    thr = params.config.threshold if threshold is None else threshold
    if not inp.has_bbox_track():
        return _prediction(0.0, thr, abstained=True)
    with nn.no_grad():
        p = window_probability(inp, params, mode)
    return _prediction(float(p.data[0]), thr)
