"""Scenario configuration for the synthetic episode generator."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..data.types import LIGHTING_TAGS

__all__ = [
    "ACTIVITIES",
    "ACTIVITY_SPEEDS",
    "GAIT_PROFILES",
    "PIXEL_NOISE",
    "CONTRAST",
    "ActivitySegment",
    "ScenarioConfig",
]

ACTIVITIES = ("standing", "walking", "jogging")

# Ground speed in m/s per activity.
ACTIVITY_SPEEDS = {"standing": 0.0, "walking": 1.4, "jogging": 2.6}

# (stride frequency Hz, vertical acceleration amplitude m/s^2); walking and
# jogging are linearly separable in this plane by construction.
GAIT_PROFILES = {"standing": (0.0, 0.0), "walking": (2.0, 1.5), "jogging": (3.0, 4.0)}

# Raster degradation per lighting tag.  Sensors are unaffected by lighting.
PIXEL_NOISE = {"sunny": 0.02, "cloudy": 0.05, "rainy": 0.09, "night": 0.18}
CONTRAST = {"sunny": 1.0, "cloudy": 0.75, "rainy": 0.6, "night": 0.3}


@dataclass(frozen=True)
class ActivitySegment:
    activity: str
    duration_s: float

    def __post_init__(self):
        if self.activity not in ACTIVITIES:
            raise ValueError(f"unknown activity {self.activity!r}")
        if self.duration_s <= 0:
            raise ValueError(f"segment duration must be > 0, got {self.duration_s}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that determines one synthetic episode.

    The behavior script is a timeline of activity segments plus an optional
    crossing decision time; labels switch to crossing at the decision time.
    The pedestrian turns toward the road ``approach_lead_s`` before that, so
    the behavioral precursor is observable slightly ahead of the label.
    """

    seed: int
    duration_s: float
    segments: tuple[ActivitySegment, ...]
    decision_time_s: float | None
    initial_distance_m: float
    approach_speed_mps: float
    lighting: str
    episode_id: str = "episode"
    fps: int = 30
    frame_w: int = 640
    frame_h: int = 360
    focal_px: float = 800.0
    context_size: int = 32
    ped_height_m: float = 1.7
    sidewalk_offset_m: float = 4.0
    camera_height_m: float = 1.4
    pixel_noise: float | None = None      # None: lighting default
    imu_noise: float = 0.3
    gps_jitter_m: float = 0.25
    approach_lead_s: float = 0.65
    preroll_s: float = 2.5                # sensor/GPS history before frame 0

    def __post_init__(self):
        if self.lighting not in LIGHTING_TAGS:
            raise ValueError(f"unknown lighting tag {self.lighting!r}")
        if self.initial_distance_m <= 0:
            raise ValueError(f"initial distance must be > 0, got {self.initial_distance_m}")
        if self.approach_speed_mps < 0:
            raise ValueError(f"approach speed must be >= 0, got {self.approach_speed_mps}")
        min_duration = 2.0 * (16 + 30) / self.fps
        if self.duration_s < min_duration:
            raise ValueError(
                f"duration {self.duration_s}s too short for one observation window "
                f"(need >= {min_duration:.2f}s at {self.fps} fps)"
            )
        if not self.segments:
            raise ValueError("behavior script needs at least one segment")
        total = sum(s.duration_s for s in self.segments)
        if total < self.duration_s - 1e-9:
            raise ValueError(
                f"segments cover {total:.2f}s of a {self.duration_s:.2f}s episode"
            )
        if self.decision_time_s is not None:
            if not 0.0 < self.decision_time_s < self.duration_s:
                raise ValueError(
                    f"decision time {self.decision_time_s} outside (0, {self.duration_s})"
                )
            start = max(0.0, self.decision_time_s - self.approach_lead_s)
            probe = start
            while probe < self.duration_s:
                if self.activity_at(probe) == "standing":
                    raise ValueError(
                        "script stands still during the crossing approach; crossing "
                        "segments must be walking or jogging"
                    )
                probe += 0.25
        if self.approach_lead_s < 0:
            raise ValueError("approach lead must be >= 0")

    def activity_at(self, t_s: float) -> str:
        """Activity at time t; the pre-roll extends the first segment backwards."""
        if t_s < 0:
            return self.segments[0].activity
        elapsed = 0.0
        for seg in self.segments:
            elapsed += seg.duration_s
            if t_s < elapsed:
                return seg.activity
        return self.segments[-1].activity

    @property
    def approach_start_s(self) -> float | None:
        if self.decision_time_s is None:
            return None
        return max(0.0, self.decision_time_s - self.approach_lead_s)

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    def pixel_noise_level(self) -> float:
        return PIXEL_NOISE[self.lighting] if self.pixel_noise is None else self.pixel_noise
