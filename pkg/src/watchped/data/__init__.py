"""Episode domain types, on-disk format, and the annotation pipeline."""

from .types import (
    LIGHTING_TAGS,
    BBOX_SOURCES,
    ACTIONS,
    ParseError,
    SyncError,
    WindowError,
    BBox,
    PoseFrame,
    SensorSample,
    GpsSample,
    SpeedSample,
    ContextRaster,
    Episode,
    WindowConfig,
    ModelInput,
)
from .episode_io import parse_episode, write_episode, EPISODE_FILES
from .processing import (
    interpolate_bboxes,
    purge_pose,
    sync_sensor_to_frames,
    direction_features,
    frame_direction_features,
    build_window,
    extract_windows,
    EARTH_RADIUS_M,
)

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
    "parse_episode",
    "write_episode",
    "EPISODE_FILES",
    "interpolate_bboxes",
    "purge_pose",
    "sync_sensor_to_frames",
    "direction_features",
    "frame_direction_features",
    "build_window",
    "extract_windows",
    "EARTH_RADIUS_M",
]
