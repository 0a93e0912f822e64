"""Seeded synthetic episode and suite generation."""

from .scenario import (
    ACTIVITIES,
    ACTIVITY_SPEEDS,
    GAIT_PROFILES,
    PIXEL_NOISE,
    CONTRAST,
    ActivitySegment,
    ScenarioConfig,
)
from .generate import (
    BoxDims,
    project_bbox,
    generate_episode,
    frame_activities,
    generate_suite,
    build_scenario,
    SuiteMix,
    write_activity,
    read_activity,
    GRAVITY,
    ORIGIN_MS,
    BASE_LAT,
    BASE_LON,
)

__all__ = [
    "ACTIVITIES",
    "ACTIVITY_SPEEDS",
    "GAIT_PROFILES",
    "PIXEL_NOISE",
    "CONTRAST",
    "ActivitySegment",
    "ScenarioConfig",
    "BoxDims",
    "project_bbox",
    "generate_episode",
    "frame_activities",
    "generate_suite",
    "build_scenario",
    "SuiteMix",
    "write_activity",
    "read_activity",
    "GRAVITY",
    "ORIGIN_MS",
    "BASE_LAT",
    "BASE_LON",
]
