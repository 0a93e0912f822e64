"""Architecture configuration, size-parametric between desk and full scale."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

__all__ = ["ArchConfig", "desk_config", "full_config", "load_config"]


@dataclass(frozen=True)
class ArchConfig:
    """Sizes and normalization constants for the three-branch model.

    The vision branch runs one conv stage per entry of ``conv_channels``
    (3x3 conv, padding 1, ReLU, 2x2 max pool), then averages the final map
    over its full spatial extent, so the per-frame feature width equals
    ``conv_channels[-1]``.  ``fusion_dim`` must equal ``2 * vision_hidden``
    because the two per-context attention vectors are concatenated into the
    vision vector, which is stacked with the non-vision vector for fusion.
    """

    m: int = 16
    context_size: int = 32
    conv_channels: tuple[int, ...] = (8, 32)
    vision_hidden: int = 8
    pose_hidden: int = 8
    traj_hidden: int = 8
    fusion_dim: int = 16

    cnn1_frame: int = 100
    cnn1_channels: tuple[int, ...] = (8, 16)
    cnn1_kernel: int = 5
    cnn1_pool: int = 2
    activity_classes: int = 3

    cnn2_channels: tuple[int, ...] = (16,)
    cnn2_kernel: int = 3

    threshold: float = 0.5

    # Input normalization (raw units divided by these before entering the net).
    frame_w: int = 640
    frame_h: int = 360
    speed_scale: float = 30.0
    accel_scale: float = 20.0
    gyro_scale: float = 5.0
    bearing_scale: float = math.pi
    dir_speed_scale: float = 3.0
    bbox_delta_scale: float = 5.0

    def __post_init__(self):
        if self.fusion_dim != 2 * self.vision_hidden:
            raise ValueError(
                f"fusion_dim must be 2*vision_hidden so the vision and non-vision "
                f"vectors stack; got {self.fusion_dim} vs 2*{self.vision_hidden}"
            )
        if self.context_size < 2 ** len(self.conv_channels):
            raise ValueError(
                f"context_size {self.context_size} too small for "
                f"{len(self.conv_channels)} pooling stages"
            )
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0,1), got {self.threshold}")
        if self.cnn1_frame < self.cnn1_kernel:
            raise ValueError("cnn1_frame shorter than its kernel")

    @property
    def cnn_feature_dim(self) -> int:
        return self.conv_channels[-1]

    @property
    def sensor_feature_dim(self) -> int:
        return self.cnn2_channels[-1]

    @property
    def pooled_map_size(self) -> int:
        return self.context_size // (2 ** len(self.conv_channels))

    def cnn1_flat_dim(self) -> int:
        t = self.cnn1_frame
        for _ in self.cnn1_channels:
            t = (t - self.cnn1_kernel + 1) // self.cnn1_pool
        return t * self.cnn1_channels[-1]

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def from_dict(cls, raw: dict) -> "ArchConfig":
        base = desk_config() if raw.get("preset", "desk") == "desk" else full_config()
        fields = {f.name for f in dataclasses.fields(cls)}
        overrides = {k: v for k, v in raw.items() if k in fields}
        for key in ("conv_channels", "cnn1_channels", "cnn2_channels"):
            if key in overrides:
                overrides[key] = tuple(overrides[key])
        return dataclasses.replace(base, **overrides)


def desk_config() -> ArchConfig:
    """Small sizes so a full gradient check runs in seconds."""
    return ArchConfig()


def full_config() -> ArchConfig:
    """The published shape points: pose GRU [16,256], pooled map [512,14,14].

    Context rasters are 224x224: four halvings of 224 give the documented
    14x14 feature map, whereas the 244 figure that also circulates does not
    divide down to it, so 244 is treated as a transcription error.
    """
    return ArchConfig(
        m=16,
        context_size=224,
        conv_channels=(64, 128, 256, 512),
        vision_hidden=256,
        pose_hidden=256,
        traj_hidden=256,
        fusion_dim=512,
    )


def load_config(path) -> ArchConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if "arch" in raw:
        raw = raw["arch"]
    return ArchConfig.from_dict(raw)
