"""Domain types for episodes, annotation streams and observation windows."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

__all__ = [
    "LIGHTING_TAGS",
    "BBOX_SOURCES",
    "ACTIONS",
    "ParseError",
    "SyncError",
    "WindowError",
    "BBox",
    "PoseFrame",
    "SensorSample",
    "GpsSample",
    "SpeedSample",
    "ContextRaster",
    "Episode",
    "WindowConfig",
    "ModelInput",
]

LIGHTING_TAGS = ("sunny", "cloudy", "rainy", "night")
BBOX_SOURCES = ("detected", "manual", "interpolated")
ACTIONS = ("not_crossing", "crossing")
N_KEYPOINTS = 18


class ParseError(ValueError):
    """A dataset file failed validation; the message carries file and row."""


class SyncError(ValueError):
    """A frame has no sensor sample within the sync tolerance."""


class WindowError(ValueError):
    """An observation window cannot be cut at the requested frame."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pedestrian box: top-left (x1,y1), bottom-right (x2,y2)."""

    frame_index: int
    x1: float
    y1: float
    x2: float
    y2: float
    source: str = "detected"

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(
                f"bbox corners out of order at frame {self.frame_index}: "
                f"({self.x1},{self.y1})-({self.x2},{self.y2})"
            )
        if self.source not in BBOX_SOURCES:
            raise ValueError(f"unknown bbox source {self.source!r}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    def contains(self, x: float, y: float) -> bool:
        # Boundary points count as inside.
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2


@dataclass(frozen=True)
class PoseFrame:
    """18 body keypoints with per-point validity flags."""

    frame_index: int
    keypoints: np.ndarray   # [18, 2] pixel coordinates
    valid: np.ndarray       # [18] bool

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        vd = np.asarray(self.valid, dtype=bool)
        if kp.shape != (N_KEYPOINTS, 2) or vd.shape != (N_KEYPOINTS,):
            raise ValueError(
                f"pose frame {self.frame_index} needs [{N_KEYPOINTS},2] keypoints and "
                f"[{N_KEYPOINTS}] flags, got {kp.shape} and {vd.shape}"
            )
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "valid", vd)


@dataclass(frozen=True)
class SensorSample:
    """One accelerometer+gyroscope reading; timestamps are epoch milliseconds."""

    timestamp_ms: int
    ax: float
    ay: float
    az: float
    gx: float
    gy: float
    gz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ax, self.ay, self.az, self.gx, self.gy, self.gz])


@dataclass(frozen=True)
class GpsSample:
    timestamp_ms: int
    latitude: float
    longitude: float

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ValueError(
                f"gps out of range at t={self.timestamp_ms}: ({self.latitude}, {self.longitude})"
            )


@dataclass(frozen=True)
class SpeedSample:
    timestamp_ms: int
    speed_mps: float

    def __post_init__(self):
        if self.speed_mps < 0:
            raise ValueError(f"negative speed {self.speed_mps} at t={self.timestamp_ms}")


@dataclass(frozen=True)
class ContextRaster:
    """One context image, square, RGB, values in [0,1]."""

    frame_index: int
    kind: str               # "local" | "global"
    pixels: np.ndarray      # [H, W, 3] float64 in [0,1]

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] != px.shape[1]:
            raise ValueError(f"context raster must be square HxWx3, got {px.shape}")
        if self.kind not in ("local", "global"):
            raise ValueError(f"unknown raster kind {self.kind!r}")
        object.__setattr__(self, "pixels", px)


@dataclass
class Episode:
    """One scenario: frame clock, pedestrian track, sensor streams, tags.

    Context rasters are stored as uint8 (the on-disk PNG precision) and
    exposed as [0,1] floats through ``local_raster``/``global_raster`` and
    the window builder.  Bounding boxes and poses may be sparse over frames;
    missing entries model annotation failures.
    """

    id: str
    fps: int
    n_frames: int
    origin_ms: int
    frame_w: int
    frame_h: int
    lighting: str
    bboxes: dict[int, BBox]
    poses: dict[int, PoseFrame]
    sensor: tuple[SensorSample, ...]
    gps: tuple[GpsSample, ...]
    speed: tuple[SpeedSample, ...]
    local_ctx: np.ndarray    # [T, S, S, 3] uint8
    global_ctx: np.ndarray   # [T, S, S, 3] uint8
    distance_m: np.ndarray   # [T] float
    labels: np.ndarray       # [T] int, 1 = crossing

    def __post_init__(self):
        if self.lighting not in LIGHTING_TAGS:
            raise ValueError(f"unknown lighting tag {self.lighting!r}")
        for name in ("local_ctx", "global_ctx"):
            arr = getattr(self, name)
            if arr.shape[0] != self.n_frames:
                raise ValueError(f"{name} covers {arr.shape[0]} frames, episode has {self.n_frames}")
        if len(self.distance_m) != self.n_frames or len(self.labels) != self.n_frames:
            raise ValueError("distance/label sequences must cover every frame")

    @property
    def frame_timestamps(self) -> np.ndarray:
        base = np.round(np.arange(self.n_frames) * 1000.0 / self.fps).astype(np.int64)
        return self.origin_ms + base

    def frame_timestamp(self, i: int) -> int:
        return int(self.origin_ms + round(i * 1000.0 / self.fps))

    def local_raster(self, i: int) -> ContextRaster:
        return ContextRaster(i, "local", self.local_ctx[i].astype(np.float64) / 255.0)

    def global_raster(self, i: int) -> ContextRaster:
        return ContextRaster(i, "global", self.global_ctx[i].astype(np.float64) / 255.0)

    def with_sensor(self, sensor: tuple[SensorSample, ...]) -> "Episode":
        return replace(self, sensor=sensor)


@dataclass(frozen=True)
class WindowConfig:
    """Observation window geometry.

    m observed frames, label taken f frames past the last observed frame,
    sensor_window trailing motion-sensor samples aligned to the window end.
    """

    m: int = 16
    f: int = 30
    sensor_window: int = 100
    sync_tolerance_ms: int = 20

    def __post_init__(self):
        if self.m < 1 or self.f < 1:
            raise ValueError(f"window config needs m >= 1 and f >= 1, got m={self.m}, f={self.f}")
        if self.sensor_window < 1:
            raise ValueError(f"sensor_window must be >= 1, got {self.sensor_window}")


@dataclass
class ModelInput:
    """One observation window, raw units, fixed shapes.

    Missing poses are zero rows with the mask cleared; missing bounding boxes
    are all-zero rows (a zero-area box at the origin never occurs naturally).
    """

    pose: np.ndarray        # [m, 36]
    pose_mask: np.ndarray   # [m] float 0/1
    bbox: np.ndarray        # [m, 4]
    speed: np.ndarray       # [m, 1]
    local_ctx: np.ndarray   # [m, S, S, 3] float in [0,1]
    global_ctx: np.ndarray  # [m, S, S, 3]
    sensor: np.ndarray      # [N, 6]
    direction: np.ndarray   # [m, 4]
    label: int

    def __post_init__(self):
        m = self.pose.shape[0]
        shapes: Mapping[str, tuple] = {
            "pose": (m, 36), "pose_mask": (m,), "bbox": (m, 4),
            "speed": (m, 1), "direction": (m, 4),
        }
        for name, want in shapes.items():
            got = getattr(self, name).shape
            if got != want:
                raise ValueError(f"ModelInput.{name} must be {want}, got {got}")
        for name in ("local_ctx", "global_ctx"):
            if getattr(self, name).shape[0] != m:
                raise ValueError(f"ModelInput.{name} must cover {m} frames")
        if self.sensor.ndim != 2 or self.sensor.shape[1] != 6 or self.sensor.shape[0] < 1:
            raise ValueError(f"ModelInput.sensor must be a nonempty [N,6], got {self.sensor.shape}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")

    @property
    def m(self) -> int:
        return self.pose.shape[0]

    def has_bbox_track(self) -> bool:
        return bool(np.any(self.bbox != 0.0))
