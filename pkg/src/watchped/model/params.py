"""Trainable weights for all branches, with a flat named view for the optimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..nn import AttentionParams, GruParams, Tensor
from .config import ArchConfig

__all__ = ["ConvLayer", "Cnn1Params", "Cnn2Params", "ModelParams",
           "load_cnn1_file", "load_cnn2_file"]


@dataclass
class ConvLayer:
    """One convolution's kernels plus per-channel bias."""

    kernels: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, c_out: int, c_in: int, *kdims: int) -> "ConvLayer":
        fan_in = c_in * int(np.prod(kdims))
        k = Tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (c_out, c_in, *kdims)),
                   requires_grad=True)
        b = Tensor(rng.uniform(-0.01, 0.01, c_out), requires_grad=True)
        return cls(k, b)

    def named(self, prefix: str):
        yield f"{prefix}.kernels", self.kernels
        yield f"{prefix}.bias", self.bias


@dataclass
class Cnn1Params:
    """Activity classifier over a raw motion-sensor window."""

    layers: list[ConvLayer]
    head_w: Tensor
    head_b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, config: ArchConfig) -> "Cnn1Params":
        layers = []
        c_in = 6
        for c_out in config.cnn1_channels:
            layers.append(ConvLayer.init(rng, c_out, c_in, config.cnn1_kernel))
            c_in = c_out
        flat = config.cnn1_flat_dim()
        head_w = Tensor(rng.normal(0.0, 1.0 / np.sqrt(flat), (config.activity_classes, flat)),
                        requires_grad=True)
        head_b = Tensor(rng.uniform(-0.01, 0.01, config.activity_classes), requires_grad=True)
        return cls(layers, head_w, head_b)

    def named(self, prefix: str):
        for i, layer in enumerate(self.layers):
            yield from layer.named(f"{prefix}.conv{i}")
        yield f"{prefix}.head_w", self.head_w
        yield f"{prefix}.head_b", self.head_b


@dataclass
class Cnn2Params:
    """Direction-feature encoder; global average pooling over time makes it
    usable both on its own training windows and on observation windows."""

    layers: list[ConvLayer]
    head_w: Tensor
    head_b: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, config: ArchConfig) -> "Cnn2Params":
        layers = []
        c_in = config.activity_classes + 4
        for c_out in config.cnn2_channels:
            layers.append(ConvLayer.init(rng, c_out, c_in, config.cnn2_kernel))
            c_in = c_out
        # Head is used only when the encoder is pretrained standalone.
        head_w = Tensor(rng.normal(0.0, 1.0 / np.sqrt(c_in), (2, c_in)), requires_grad=True)
        head_b = Tensor(rng.uniform(-0.01, 0.01, 2), requires_grad=True)
        return cls(layers, head_w, head_b)

    def named(self, prefix: str):
        for i, layer in enumerate(self.layers):
            yield from layer.named(f"{prefix}.conv{i}")
        yield f"{prefix}.head_w", self.head_w
        yield f"{prefix}.head_b", self.head_b


@dataclass
class ModelParams:
    """Every trainable weight of the three branches and the fusion heads."""

    config: ArchConfig
    gru_pose: GruParams
    gru_traj: GruParams
    gru_ctx: GruParams
    attn_nv: AttentionParams
    local_convs: list[ConvLayer]
    local_gru: GruParams
    local_attn: AttentionParams
    global_convs: list[ConvLayer]
    global_gru: GruParams
    global_attn: AttentionParams
    cnn1: Cnn1Params
    cnn2: Cnn2Params
    attn_fusion: AttentionParams
    fc_w: Tensor
    fc_b: Tensor

    @classmethod
    def init(cls, config: ArchConfig, seed: int = 0) -> "ModelParams":
        rng = np.random.default_rng(seed)

        def conv_stack():
            stack, c_in = [], 3
            for c_out in config.conv_channels:
                stack.append(ConvLayer.init(rng, c_out, c_in, 3, 3))
                c_in = c_out
            return stack

        d_cnn = config.cnn_feature_dim
        fused = config.fusion_dim
        v_s = config.sensor_feature_dim
        fc_in = fused + v_s
        return cls(
            config=config,
            gru_pose=GruParams.init(rng, 36, config.pose_hidden),
            gru_traj=GruParams.init(rng, config.pose_hidden + 4, config.traj_hidden),
            gru_ctx=GruParams.init(rng, config.traj_hidden + 1, fused),
            attn_nv=AttentionParams.init(rng, fused),
            local_convs=conv_stack(),
            local_gru=GruParams.init(rng, d_cnn, config.vision_hidden),
            local_attn=AttentionParams.init(rng, config.vision_hidden),
            global_convs=conv_stack(),
            global_gru=GruParams.init(rng, d_cnn, config.vision_hidden),
            global_attn=AttentionParams.init(rng, config.vision_hidden),
            cnn1=Cnn1Params.init(rng, config),
            cnn2=Cnn2Params.init(rng, config),
            attn_fusion=AttentionParams.init(rng, fused),
            fc_w=Tensor(rng.normal(0.0, 1.0 / np.sqrt(fc_in), (1, fc_in)), requires_grad=True),
            fc_b=Tensor(rng.uniform(-0.01, 0.01, 1), requires_grad=True),
        )

    def named_parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.gru_pose.named("non_vision.gru_pose"))
        out.update(self.gru_traj.named("non_vision.gru_traj"))
        out.update(self.gru_ctx.named("non_vision.gru_ctx"))
        out.update(self.attn_nv.named("non_vision.attn"))
        for i, layer in enumerate(self.local_convs):
            out.update(layer.named(f"vision.local.conv{i}"))
        out.update(self.local_gru.named("vision.local.gru"))
        out.update(self.local_attn.named("vision.local.attn"))
        for i, layer in enumerate(self.global_convs):
            out.update(layer.named(f"vision.global.conv{i}"))
        out.update(self.global_gru.named("vision.global.gru"))
        out.update(self.global_attn.named("vision.global.attn"))
        out.update(self.cnn1.named("sensor.cnn1"))
        out.update(self.cnn2.named("sensor.cnn2"))
        out.update(self.attn_fusion.named("fusion.attn"))
        out["fusion.fc_w"] = self.fc_w
        out["fusion.fc_b"] = self.fc_b
        return out

    def fc_weight_tensors(self) -> list[Tensor]:
        """Weight matrices the L2 penalty applies to (bias excluded)."""
        return [self.fc_w]

    def save(self, path) -> None:
        nn.save_weights(path, self.named_parameters())

    def load(self, path) -> "ModelParams":
        loaded = nn.load_weights(path)
        own = self.named_parameters()
        missing = sorted(set(own) - set(loaded))
        if missing:
            raise ValueError(f"weights file lacks parameters, first missing: {missing[0]}")
        for name, tensor in own.items():
            arr = loaded[name]
            if arr.shape != tensor.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: file {arr.shape} vs model {tensor.data.shape}"
                )
            tensor.data = arr.copy()
        return self

    def load_cnn1(self, cnn1: Cnn1Params) -> None:
        for (_, dst), (_, src) in zip(self.cnn1.named("x"), cnn1.named("x")):
            if dst.data.shape != src.data.shape:
                raise ValueError("pretrained activity-classifier shapes do not match the config")
            dst.data = src.data.copy()

    def load_cnn2(self, cnn2: Cnn2Params) -> None:
        for (_, dst), (_, src) in zip(self.cnn2.named("x"), cnn2.named("x")):
            if dst.data.shape != src.data.shape:
                raise ValueError("pretrained direction-encoder shapes do not match the config")
            dst.data = src.data.copy()


def _load_named(path, params, prefix: str):
    loaded = nn.load_weights(path)
    for name, tensor in params.named(prefix):
        if name not in loaded:
            raise ValueError(f"{path}: missing weight {name}")
        if loaded[name].shape != tensor.data.shape:
            raise ValueError(f"{path}: {name} has shape {loaded[name].shape}, "
                             f"expected {tensor.data.shape}")
        tensor.data = loaded[name].copy()
    return params


def load_cnn1_file(path, config: ArchConfig) -> Cnn1Params:
    return _load_named(path, Cnn1Params.init(np.random.default_rng(0), config), "cnn1")


def load_cnn2_file(path, config: ArchConfig) -> Cnn2Params:
    return _load_named(path, Cnn2Params.init(np.random.default_rng(0), config), "cnn2")
