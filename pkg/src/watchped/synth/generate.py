"""Deterministic synthetic episode generation.

World model: the road runs east-west; the pedestrian starts on the sidewalk
``sidewalk_offset_m`` to the side of the camera axis, walking parallel to the
road (or standing).  For crossing scripts the heading turns toward the road
shortly before the label switches.  The ego vehicle closes the range at the
configured approach speed.  Boxes come from a pinhole projection of a
1.7 m pedestrian; the motion sensors carry a gait sinusoid plus noise; rasters
are procedurally drawn with lighting-dependent contrast and noise.

Annotation availability mimics how real annotation pipelines degrade:

    daylight, range <= 70 m   detected box every frame, small noise
    daylight, range  > 70 m   manual anchors + linear interpolation
    night,    range <= 40 m   sparse manual anchors, larger noise
    night,    range  > 40 m   no boxes at all
    poses exist only in daylight within 40 m

Motion sensors and GPS never degrade with lighting or distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from ..data.episode_io import write_episode
from ..data.processing import EARTH_RADIUS_M, interpolate_bboxes
from ..data.types import (
    BBox,
    Episode,
    GpsSample,
    PoseFrame,
    SensorSample,
    SpeedSample,
    LIGHTING_TAGS,
)
from .scenario import (
    ACTIVITIES,
    ACTIVITY_SPEEDS,
    CONTRAST,
    GAIT_PROFILES,
    ActivitySegment,
    ScenarioConfig,
)

__all__ = [
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

GRAVITY = 9.81
ORIGIN_MS = 1_000_000_000_000
BASE_LAT = 35.0
BASE_LON = -90.0
_M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0
_TURN_S = 0.4

# Stylized scene palette (RGB in [0,1]).
_SKY = np.array([0.36, 0.45, 0.62])
_ROAD = np.array([0.33, 0.33, 0.35])
_SIDEWALK = np.array([0.48, 0.45, 0.40])
_PED_BLOB = np.array([0.85, 0.15, 0.15])
_TORSO = np.array([0.22, 0.28, 0.70])
_HEAD = np.array([0.80, 0.65, 0.52])
_LEGS = np.array([0.18, 0.18, 0.24])

# 18-keypoint template as (x, y) fractions of the box, top-left origin.
_POSE_TEMPLATE = np.array([
    (0.50, 0.08), (0.50, 0.20), (0.35, 0.22), (0.30, 0.38), (0.32, 0.52),
    (0.65, 0.22), (0.70, 0.38), (0.68, 0.52), (0.42, 0.52), (0.40, 0.72),
    (0.40, 0.95), (0.58, 0.52), (0.60, 0.72), (0.60, 0.95), (0.46, 0.06),
    (0.54, 0.06), (0.42, 0.08), (0.58, 0.08),
])
_LEG_POINTS = (9, 10, 12, 13)       # knees and ankles swing with the gait
_ARM_POINTS = (3, 4, 6, 7)


class BoxDims(NamedTuple):
    width_px: float
    height_px: float


def project_bbox(distance_m: float, ped_height_m: float, focal_px: float,
                 frame_size: tuple[int, int]) -> BoxDims:
    """Pinhole box size at range: height = focal * height / distance, width 0.4 * height.

    Both are clamped to the frame.
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    height = min(focal_px * ped_height_m / distance_m, float(frame_size[1]))
    width = min(0.4 * height, float(frame_size[0]))
    return BoxDims(width, height)


# ---- world kinematics ----

def _motion_grid(cfg: ScenarioConfig):
    dt = 0.01
    n = int(round((cfg.preroll_s + cfg.duration_s) / dt)) + 1
    t = -cfg.preroll_s + dt * np.arange(n)
    speed = np.array([ACTIVITY_SPEEDS[cfg.activity_at(ts)] for ts in t])
    heading = np.full(n, math.pi / 2.0)      # east, parallel to the road
    start = cfg.approach_start_s
    if start is not None:
        ramp = np.clip((t - start) / _TURN_S, 0.0, 1.0)
        heading = heading + ramp * (math.pi - math.pi / 2.0)   # turn to south
    vx = speed * np.sin(heading)
    vy = speed * np.cos(heading)
    x = np.concatenate([[0.0], np.cumsum(0.5 * (vx[1:] + vx[:-1]) * dt)])
    y = np.concatenate([[0.0], np.cumsum(0.5 * (vy[1:] + vy[:-1]) * dt)])
    turn_rate = np.gradient(heading, dt)
    return t, x, y, heading, turn_rate


def frame_activities(cfg: ScenarioConfig) -> list[str]:
    """Activity tag per video frame (the behavioral ground truth)."""
    return [cfg.activity_at(i / cfg.fps) for i in range(cfg.n_frames)]


def _sensor_stream(cfg: ScenarioConfig, rng, grid, phase0: float,
                   freq_jitter: float) -> tuple[SensorSample, ...]:
    t_grid, _, _, _, turn_rate = grid
    start_ms = -int(round(cfg.preroll_s * 1000))
    end_ms = int(round(cfg.duration_s * 1000))
    times_ms = np.arange(start_ms, end_ms + 1, 20, dtype=np.int64)
    t_s = times_ms / 1000.0
    amp = np.empty(len(t_s))
    freq = np.empty(len(t_s))
    for i, ts in enumerate(t_s):
        f0, a0 = GAIT_PROFILES[cfg.activity_at(ts)]
        amp[i] = a0
        freq[i] = f0 + (freq_jitter if f0 > 0 else 0.0)
    phase = 2.0 * math.pi * freq * t_s + phase0
    noise = rng.normal(0.0, cfg.imu_noise, (len(t_s), 6))
    ax = 0.3 * amp * np.sin(phase + 1.1) + noise[:, 0]
    ay = 0.3 * amp * np.cos(phase + 0.4) + noise[:, 1]
    az = GRAVITY + amp * np.sin(phase) + noise[:, 2]
    gz = np.interp(t_s, t_grid, turn_rate)
    gx = 0.5 * noise[:, 3]
    gy = 0.5 * noise[:, 4]
    gz = gz + 0.5 * noise[:, 5]
    return tuple(
        SensorSample(ORIGIN_MS + int(ms), float(ax[i]), float(ay[i]), float(az[i]),
                     float(gx[i]), float(gy[i]), float(gz[i]))
        for i, ms in enumerate(times_ms)
    )


def _gps_stream(cfg: ScenarioConfig, rng, grid) -> tuple[GpsSample, ...]:
    t_grid, x, y, _, _ = grid
    start_ms = -int(round(cfg.preroll_s * 1000))
    end_ms = int(round(cfg.duration_s * 1000))
    times = list(range(start_ms, end_ms + 1, 1000))
    if times[-1] < end_ms:
        times.append(end_ms)
    jitter = rng.normal(0.0, cfg.gps_jitter_m, (len(times), 2))
    out = []
    for i, ms in enumerate(times):
        px = np.interp(ms / 1000.0, t_grid, x) + jitter[i, 0]
        py = np.interp(ms / 1000.0, t_grid, y) + jitter[i, 1]
        lat = BASE_LAT + py / _M_PER_DEG
        lon = BASE_LON + px / (_M_PER_DEG * math.cos(math.radians(BASE_LAT)))
        out.append(GpsSample(ORIGIN_MS + int(ms), float(lat), float(lon)))
    return tuple(out)


def _speed_stream(cfg: ScenarioConfig, rng) -> tuple[SpeedSample, ...]:
    end_ms = int(round(cfg.duration_s * 1000))
    times = list(range(0, end_ms + 1, 1000))
    wiggle = rng.normal(0.0, 0.05, len(times))
    return tuple(
        SpeedSample(ORIGIN_MS + int(ms), max(0.0, cfg.approach_speed_mps + float(wiggle[i])))
        for i, ms in enumerate(times)
    )


# ---- camera geometry ----

def _true_box(cfg: ScenarioConfig, distance: float, lateral: float) -> tuple[float, float, float, float]:
    w, h = project_bbox(distance, cfg.ped_height_m, cfg.focal_px, (cfg.frame_w, cfg.frame_h))
    cx = cfg.frame_w / 2.0 + cfg.focal_px * lateral / distance
    bottom = cfg.frame_h / 2.0 + cfg.focal_px * cfg.camera_height_m / distance
    x1 = np.clip(cx - w / 2.0, 0.0, cfg.frame_w)
    x2 = np.clip(cx + w / 2.0, x1, cfg.frame_w)
    y2 = np.clip(bottom, 0.0, cfg.frame_h)
    y1 = np.clip(bottom - h, 0.0, y2)
    return float(x1), float(y1), float(x2), float(y2)


def _noisy_box(frame: int, true_box, sigma: float, source: str, rng,
               frame_w: int, frame_h: int) -> BBox:
    x1, y1, x2, y2 = true_box
    cx, cy = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
    w, h = x2 - x1, y2 - y1
    n = rng.normal(0.0, sigma, 4)
    cx += n[0]
    cy += n[1]
    w = max(1.0, w * (1.0 + 0.05 * n[2]))
    h = max(2.0, h * (1.0 + 0.05 * n[3]))
    nx1 = float(np.clip(cx - w / 2.0, 0.0, frame_w))
    nx2 = float(np.clip(cx + w / 2.0, nx1, frame_w))
    ny1 = float(np.clip(cy - h / 2.0, 0.0, frame_h))
    ny2 = float(np.clip(cy + h / 2.0, ny1, frame_h))
    return BBox(frame, nx1, ny1, nx2, ny2, source)


def _annotate_boxes(cfg: ScenarioConfig, rng, true_boxes, distance) -> dict[int, BBox]:
    """Apply the availability policy described in the module docstring."""
    night = cfg.lighting == "night"
    regimes = []
    for i in range(cfg.n_frames):
        d = distance[i]
        if night:
            regimes.append("anchor" if d <= 40.0 else "none")
        else:
            regimes.append("detected" if d <= 70.0 else "anchor")
    boxes: dict[int, BBox] = {}
    anchor_step = 10 if night else 15
    anchor_sigma = 4.0 if night else 2.0
    i = 0
    while i < cfg.n_frames:
        regime = regimes[i]
        j = i
        while j + 1 < cfg.n_frames and regimes[j + 1] == regime:
            j += 1
        if regime == "detected":
            for k in range(i, j + 1):
                sigma = 0.8 + distance[k] / 50.0
                boxes[k] = _noisy_box(k, true_boxes[k], sigma, "detected", rng,
                                      cfg.frame_w, cfg.frame_h)
        elif regime == "anchor":
            anchor_frames = sorted({i, j} | {k for k in range(i, j + 1) if k % anchor_step == 0})
            anchors = [
                _noisy_box(k, true_boxes[k], anchor_sigma, "manual", rng,
                           cfg.frame_w, cfg.frame_h)
                for k in anchor_frames
            ]
            if len(anchors) == 1:
                boxes[anchors[0].frame_index] = anchors[0]
            else:
                for b in interpolate_bboxes(anchors, (i, j)):
                    boxes[b.frame_index] = b
        i = j + 1
    return boxes


def _poses(cfg: ScenarioConfig, rng, true_boxes, distance, phases, amps) -> dict[int, PoseFrame]:
    if cfg.lighting == "night":
        return {}
    poses: dict[int, PoseFrame] = {}
    for i in range(cfg.n_frames):
        if distance[i] > 40.0:
            continue
        x1, y1, x2, y2 = true_boxes[i]
        w, h = x2 - x1, y2 - y1
        if w < 2.0 or h < 4.0:
            continue
        kp = _POSE_TEMPLATE.copy()
        swing = 0.12 * math.sin(phases[i]) * (amps[i] / GAIT_PROFILES["walking"][1] if amps[i] else 0.0)
        for p, sign in zip(_LEG_POINTS, (1.0, 1.2, -1.0, -1.2)):
            kp[p, 0] += sign * swing
        for p, sign in zip(_ARM_POINTS, (-0.6, -0.8, 0.6, 0.8)):
            kp[p, 0] += sign * swing
        pts = np.empty((18, 2))
        pts[:, 0] = x1 + kp[:, 0] * w
        pts[:, 1] = y1 + kp[:, 1] * h
        pts += rng.normal(0.0, 1.5, (18, 2))
        valid = np.ones(18, dtype=bool)
        if rng.random() < 0.10:
            drop = rng.integers(1, 4)
            valid[rng.choice(18, int(drop), replace=False)] = False
        if rng.random() < 0.07:
            stray = int(rng.integers(0, 18))
            pts[stray] += rng.uniform(60.0, 140.0, 2)
            valid[stray] = True
        pts[:, 0] = np.clip(pts[:, 0], 0.0, cfg.frame_w)
        pts[:, 1] = np.clip(pts[:, 1], 0.0, cfg.frame_h)
        pts[~valid] = 0.0
        poses[i] = PoseFrame(i, pts, valid)
    return poses


# ---- raster drawing ----

def _coverage(lo: float, hi: float, n: int) -> np.ndarray:
    cells = np.arange(n)
    return np.clip(np.minimum(hi, cells + 1.0) - np.maximum(lo, cells), 0.0, 1.0)


def _finish(tile: np.ndarray, lighting: str, noise: np.ndarray, pixel_noise: float) -> np.ndarray:
    out = 0.5 + CONTRAST[lighting] * (tile - 0.5)
    out = np.clip(out + pixel_noise * noise, 0.0, 1.0)
    return np.round(out * 255.0).astype(np.uint8)


def _global_raster(cfg: ScenarioConfig, true_box, rng) -> np.ndarray:
    gs = cfg.context_size
    tile = np.empty((gs, gs, 3))
    sky_rows = int(0.40 * gs)
    road_rows = int(0.75 * gs)
    tile[:sky_rows] = _SKY
    tile[sky_rows:road_rows] = _ROAD
    tile[road_rows:] = _SIDEWALK
    x1, y1, x2, y2 = true_box
    sx, sy = gs / cfg.frame_w, gs / cfg.frame_h
    cov_x = _coverage(x1 * sx, x2 * sx, gs)
    cov_y = _coverage(y1 * sy, y2 * sy, gs)
    cov = np.outer(cov_y, cov_x)[..., None]
    tile = tile * (1.0 - cov) + _PED_BLOB * cov
    return _finish(tile, cfg.lighting, rng.normal(0.0, 1.0, (gs, gs, 3)),
                   cfg.pixel_noise_level())


def _figure_tile(r: int, swing: float) -> np.ndarray:
    tile = np.empty((r, r, 3))
    tile[:] = _SIDEWALK
    head_lo, head_hi = int(0.04 * r), max(int(0.20 * r), int(0.04 * r) + 1)
    torso_lo, torso_hi = head_hi, max(int(0.55 * r), head_hi + 1)
    leg_hi = max(int(0.97 * r), torso_hi + 1)
    tile[head_lo:head_hi, int(0.42 * r):max(int(0.58 * r), int(0.42 * r) + 1)] = _HEAD
    tile[torso_lo:torso_hi, int(0.36 * r):max(int(0.64 * r), int(0.36 * r) + 1)] = _TORSO
    lw = max(1, int(0.10 * r))
    for base, sign in ((0.43, 1.0), (0.57, -1.0)):
        cx = (base + sign * 0.12 * swing) * r
        lo = int(np.clip(cx - lw / 2.0, 0, r - 1))
        tile[torso_hi:min(leg_hi, r), lo:min(lo + lw, r)] = _LEGS
    return tile


def _local_raster(cfg: ScenarioConfig, true_box, phase: float, amp: float, rng) -> np.ndarray:
    gs = cfg.context_size
    _, y1, _, y2 = true_box
    h_px = max(y2 - y1, 1.0)
    r = int(np.clip(round(h_px), 2, gs))
    swing = math.sin(phase) * (amp / GAIT_PROFILES["walking"][1]) if amp > 0 else 0.0
    tile = _figure_tile(r, swing)
    reps = int(math.ceil(gs / r))
    up = np.repeat(np.repeat(tile, reps, axis=0), reps, axis=1)[:gs, :gs]
    return _finish(up, cfg.lighting, rng.normal(0.0, 1.0, (gs, gs, 3)),
                   cfg.pixel_noise_level())


# ---- episode assembly ----

def generate_episode(cfg: ScenarioConfig) -> Episode:
    """Integrate the scenario into a fully populated, parseable episode."""
    rng = np.random.default_rng(cfg.seed)
    grid = _motion_grid(cfg)
    t_grid, x, y, _, _ = grid

    phase0 = float(rng.uniform(0.0, 2.0 * math.pi))
    freq_jitter = float(rng.uniform(-0.1, 0.1))
    sensor = _sensor_stream(cfg, rng, grid, phase0, freq_jitter)
    gps = _gps_stream(cfg, rng, grid)
    speed = _speed_stream(cfg, rng)

    n = cfg.n_frames
    frame_t = np.arange(n) / cfg.fps
    distance = np.maximum(3.0, cfg.initial_distance_m - cfg.approach_speed_mps * frame_t)
    lateral = cfg.sidewalk_offset_m + np.interp(frame_t, t_grid, y)
    true_boxes = [_true_box(cfg, float(distance[i]), float(lateral[i])) for i in range(n)]

    # Gait phase per frame, consistent with the accelerometer stream.
    phases = np.empty(n)
    amps = np.empty(n)
    for i in range(n):
        f0, a0 = GAIT_PROFILES[cfg.activity_at(frame_t[i])]
        f = f0 + (freq_jitter if f0 > 0 else 0.0)
        phases[i] = 2.0 * math.pi * f * frame_t[i] + phase0
        amps[i] = a0

    boxes = _annotate_boxes(cfg, rng, true_boxes, distance)
    poses = _poses(cfg, rng, true_boxes, distance, phases, amps)

    local = np.empty((n, cfg.context_size, cfg.context_size, 3), dtype=np.uint8)
    global_ = np.empty_like(local)
    for i in range(n):
        global_[i] = _global_raster(cfg, true_boxes[i], rng)
        local[i] = _local_raster(cfg, true_boxes[i], phases[i], amps[i], rng)

    labels = np.zeros(n, dtype=np.int64)
    if cfg.decision_time_s is not None:
        decision_frame = int(round(cfg.decision_time_s * cfg.fps))
        labels[decision_frame:] = 1

    return Episode(
        id=cfg.episode_id, fps=cfg.fps, n_frames=n, origin_ms=ORIGIN_MS,
        frame_w=cfg.frame_w, frame_h=cfg.frame_h, lighting=cfg.lighting,
        bboxes=boxes, poses=poses, sensor=sensor, gps=gps, speed=speed,
        local_ctx=local, global_ctx=global_, distance_m=distance, labels=labels,
    )


# ---- suites ----

@dataclass(frozen=True)
class SuiteMix:
    """How a suite spreads episodes over the distance x lighting grid."""

    distance_strata: tuple[str, ...] = ("close", "medium", "far")
    lightings: tuple[str, ...] = LIGHTING_TAGS
    crossing_fraction: tuple[tuple[str, float], ...] = (
        ("sunny", 0.65), ("cloudy", 0.65), ("rainy", 0.65), ("night", 0.45),
    )
    # (min distance, max distance, min ego speed, max ego speed) per stratum,
    # chosen so an episode stays inside its stratum band while the ego closes.
    distance_bands: tuple[tuple[str, tuple[float, float, float, float]], ...] = (
        ("close", (13.0, 19.0, 0.3, 0.8)),
        ("medium", (36.0, 64.0, 0.8, 1.8)),
        ("far", (105.0, 168.0, 2.0, 4.0)),
    )

    def crossing_prob(self, lighting: str) -> float:
        return dict(self.crossing_fraction)[lighting]

    def band(self, stratum: str) -> tuple[float, float, float, float]:
        return dict(self.distance_bands)[stratum]


def build_scenario(distance_stratum: str, lighting: str, seed: int,
                   mix: SuiteMix | None = None, episode_id: str = "episode",
                   context_size: int = 32) -> ScenarioConfig:
    """Derive a full scenario from (stratum, lighting, seed); reproducible."""
    mix = mix or SuiteMix()
    rng = np.random.default_rng(seed)
    duration = float(rng.uniform(6.5, 8.0))
    d_lo, d_hi, v_lo, v_hi = mix.band(distance_stratum)
    d0 = float(rng.uniform(d_lo, d_hi))
    v_ego = float(rng.uniform(v_lo, v_hi))
    crossing = rng.random() < mix.crossing_prob(lighting)
    lead = 0.65
    if crossing:
        decision = float(rng.uniform(0.40, 0.62)) * duration
        pre = "standing" if rng.random() < 0.5 else "walking"
        cross_act = "walking" if rng.random() < 0.7 else "jogging"
        start = max(0.0, decision - lead)
        if start > 0.05:
            segments = (ActivitySegment(pre, start), ActivitySegment(cross_act, duration - start))
        else:
            segments = (ActivitySegment(cross_act, duration),)
        decision_time = decision
    else:
        decision_time = None
        roll = rng.random()
        if roll < 0.40:
            segments = (ActivitySegment("standing", duration),)
        elif roll < 0.80:
            segments = (ActivitySegment("walking", duration),)
        else:
            segments = (ActivitySegment("walking", duration / 2),
                        ActivitySegment("standing", duration / 2))
    return ScenarioConfig(
        seed=seed, duration_s=duration, segments=segments,
        decision_time_s=decision_time, initial_distance_m=d0,
        approach_speed_mps=v_ego, lighting=lighting, episode_id=episode_id,
        context_size=context_size, approach_lead_s=lead,
    )


def write_activity(directory, activities: Sequence[str]) -> None:
    with (Path(directory) / "activity.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "activity"])
        for i, act in enumerate(activities):
            writer.writerow([i, act])


def read_activity(directory) -> list[str]:
    path = Path(directory) / "activity.csv"
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["frame", "activity"]:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            if row[1] not in ACTIVITIES:
                raise ValueError(f"{path}: unknown activity {row[1]!r}")
            out.append(row[1])
    return out


def generate_suite(n_episodes: int, out_dir, master_seed: int,
                   mix: SuiteMix | None = None, context_size: int = 32) -> list[dict]:
    """Write ``n_episodes`` episode directories plus suite_manifest.csv.

    Episodes cycle round-robin over the distance x lighting grid; per-episode
    seeds derive from the master seed and are recorded in the manifest, so any
    single episode regenerates from its manifest row alone.
    """
    if n_episodes < 1:
        raise ValueError(f"need n_episodes >= 1, got {n_episodes}")
    mix = mix or SuiteMix()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(d, l) for d in mix.distance_strata for l in mix.lightings]
    seeds = np.random.SeedSequence(master_seed).generate_state(n_episodes)
    records = []
    for i in range(n_episodes):
        stratum, lighting = cells[i % len(cells)]
        seed = int(seeds[i])
        episode_id = f"ep_{i:03d}"
        cfg = build_scenario(stratum, lighting, seed, mix, episode_id, context_size)
        episode = generate_episode(cfg)
        write_episode(episode, out / episode_id)
        write_activity(out / episode_id, frame_activities(cfg))
        records.append({"id": episode_id, "distance_stratum": stratum,
                        "lighting": lighting, "seed": seed})
    with (out / "suite_manifest.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["id", "distance_stratum", "lighting", "seed"])
        writer.writeheader()
        writer.writerows(records)
    return records
