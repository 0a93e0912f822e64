"""Annotation processing: box interpolation, pose purging, stream sync, windowing."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .types import (
    BBox,
    Episode,
    GpsSample,
    ModelInput,
    PoseFrame,
    SensorSample,
    SpeedSample,
    SyncError,
    WindowConfig,
    WindowError,
)

__all__ = [
    "interpolate_bboxes",
    "purge_pose",
    "sync_sensor_to_frames",
    "direction_features",
    "frame_direction_features",
    "build_window",
    "extract_windows",
    "EARTH_RADIUS_M",
]

EARTH_RADIUS_M = 6371000.0
_M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0


def interpolate_bboxes(track: Sequence[BBox], frame_range: tuple[int, int]) -> list[BBox]:
    """Densify a sparse box track over [first, last] (inclusive).

    Anchors pass through unchanged; every gap frame gets a box whose four
    coordinates are linear in the frame index, tagged source="interpolated".
    Frames outside the anchor span would require extrapolation and are
    rejected.
    """
    if len(track) < 2:
        raise ValueError(f"interpolation needs >= 2 anchor boxes, got {len(track)}")
    anchors = sorted(track, key=lambda b: b.frame_index)
    for a, b in zip(anchors, anchors[1:]):
        if a.frame_index == b.frame_index:
            raise ValueError(f"duplicate anchor at frame {a.frame_index}")
    first, last = frame_range
    if first > last:
        raise ValueError(f"empty frame range {frame_range}")
    if first < anchors[0].frame_index or last > anchors[-1].frame_index:
        raise ValueError(
            f"range [{first},{last}] extends beyond anchors "
            f"[{anchors[0].frame_index},{anchors[-1].frame_index}]; extrapolation is not supported"
        )
    by_frame = {b.frame_index: b for b in anchors}
    out: list[BBox] = []
    hi = 1
    for frame in range(first, last + 1):
        existing = by_frame.get(frame)
        if existing is not None:
            out.append(existing)
            continue
        while anchors[hi].frame_index < frame:
            hi += 1
        lo_b, hi_b = anchors[hi - 1], anchors[hi]
        w = (frame - lo_b.frame_index) / (hi_b.frame_index - lo_b.frame_index)
        out.append(BBox(
            frame,
            lo_b.x1 + w * (hi_b.x1 - lo_b.x1),
            lo_b.y1 + w * (hi_b.y1 - lo_b.y1),
            lo_b.x2 + w * (hi_b.x2 - lo_b.x2),
            lo_b.y2 + w * (hi_b.y2 - lo_b.y2),
            "interpolated",
        ))
    return out


def purge_pose(pose: PoseFrame, bbox: BBox) -> PoseFrame:
    """Invalidate keypoints strictly outside the box (flag cleared, coords zeroed).

    Points on the box edge are kept.  Already-invalid points stay invalid.
    """
    if pose.frame_index != bbox.frame_index:
        raise ValueError(
            f"pose frame {pose.frame_index} does not match bbox frame {bbox.frame_index}"
        )
    kp = pose.keypoints
    inside = (
        (kp[:, 0] >= bbox.x1) & (kp[:, 0] <= bbox.x2)
        & (kp[:, 1] >= bbox.y1) & (kp[:, 1] <= bbox.y2)
    )
    keep = pose.valid & inside
    new_kp = np.where(keep[:, None], kp, 0.0)
    return PoseFrame(pose.frame_index, new_kp, keep)


def sync_sensor_to_frames(
    stream: Sequence[SensorSample],
    frame_timestamps: Sequence[int],
    tolerance_ms: int,
) -> tuple[list[int], tuple[SensorSample, ...]]:
    """Map each frame to its nearest-timestamp sample.

    Returns (per-frame sample indices, the contiguous sample run spanning the
    mapped window).  Equidistant neighbours resolve to the earlier sample.
    A frame farther than ``tolerance_ms`` from every sample raises SyncError
    naming the frame.
    """
    if not stream:
        raise SyncError("sensor stream is empty")
    ts = np.array([s.timestamp_ms for s in stream], dtype=np.int64)
    if np.any(np.diff(ts) <= 0):
        bad = int(np.argmax(np.diff(ts) <= 0)) + 1
        raise SyncError(f"sensor timestamps not strictly increasing at sample {bad}")
    assignment: list[int] = []
    for k, ft in enumerate(frame_timestamps):
        pos = int(np.searchsorted(ts, ft))
        best = None
        if pos > 0:
            best = pos - 1
        if pos < len(ts):
            if best is None or abs(int(ts[pos]) - ft) < abs(int(ts[best]) - ft):
                best = pos
        dt = abs(int(ts[best]) - int(ft))
        if dt > tolerance_ms:
            raise SyncError(
                f"frame {k} (t={ft} ms) has no sensor sample within {tolerance_ms} ms "
                f"(nearest is {dt} ms away)"
            )
        assignment.append(best)
    lo, hi = min(assignment), max(assignment)
    return assignment, tuple(stream[lo:hi + 1])


def _interp_gps(gps: Sequence[GpsSample], times_ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ts = np.array([g.timestamp_ms for g in gps], dtype=np.float64)
    lat = np.interp(times_ms, ts, [g.latitude for g in gps])
    lon = np.interp(times_ms, ts, [g.longitude for g in gps])
    return lat, lon


def direction_features(
    gps: Sequence[GpsSample],
    bboxes: Sequence[BBox | None],
    frame_timestamps: Sequence[int],
) -> np.ndarray:
    """Per-frame motion features [m,4]: bearing, ground speed, box-center dx, dy.

    Bearing of the GPS displacement uses the north=0, clockwise-positive
    convention; zero displacement maps to bearing 0.  Ground speed comes from
    the local equirectangular approximation.  GPS positions are evaluated at
    frame times by linear interpolation of the surrounding fixes (clamped at
    the stream ends).  Box-center deltas are pixels per frame; a missing box
    on either side of a delta yields 0.  The first frame copies the second.
    """
    if len(gps) < 2:
        raise ValueError(f"direction features need >= 2 GPS samples, got {len(gps)}")
    m = len(frame_timestamps)
    if len(bboxes) != m:
        raise ValueError(f"got {len(bboxes)} boxes for {m} frames")
    times = np.asarray(frame_timestamps, dtype=np.float64)
    lat, lon = _interp_gps(gps, times)
    out = np.zeros((m, 4))
    for i in range(1, m):
        dt_s = (times[i] - times[i - 1]) / 1000.0
        mean_lat = math.radians(0.5 * (lat[i] + lat[i - 1]))
        dx = (lon[i] - lon[i - 1]) * _M_PER_DEG * math.cos(mean_lat)
        dy = (lat[i] - lat[i - 1]) * _M_PER_DEG
        bearing = math.atan2(dx, dy) % (2.0 * math.pi) if (dx != 0.0 or dy != 0.0) else 0.0
        speed = math.hypot(dx, dy) / dt_s if dt_s > 0 else 0.0
        prev_b, cur_b = bboxes[i - 1], bboxes[i]
        if prev_b is not None and cur_b is not None:
            dcx = cur_b.center[0] - prev_b.center[0]
            dcy = cur_b.center[1] - prev_b.center[1]
        else:
            dcx = dcy = 0.0
        out[i] = (bearing, speed, dcx, dcy)
    if m > 1:
        out[0] = out[1]
    return out


def frame_direction_features(episode: Episode) -> np.ndarray:
    """Direction features for every frame of an episode (see direction_features)."""
    boxes = [episode.bboxes.get(i) for i in range(episode.n_frames)]
    return direction_features(episode.gps, boxes, episode.frame_timestamps)


def _interp_speed(speed: Sequence[SpeedSample], times_ms: np.ndarray) -> np.ndarray:
    ts = np.array([s.timestamp_ms for s in speed], dtype=np.float64)
    return np.interp(times_ms, ts, [s.speed_mps for s in speed])


def build_window(episode: Episode, t: int, cfg: WindowConfig) -> ModelInput:
    """Cut the observation window ending at frame ``t``; label comes from t+f.

    Covers frames [t-m+1, t].  Pose rows are re-purged against the frame box
    (idempotent for already-clean data), missing poses are zero rows with the
    mask cleared, missing boxes are zero rows.  The sensor slice is the
    ``cfg.sensor_window`` samples ending at the sample aligned with frame t.
    """
    m, f = cfg.m, cfg.f
    if t < m - 1:
        raise WindowError(f"frame {t} has insufficient history for m={m}")
    if t + f >= episode.n_frames:
        raise WindowError(
            f"label frame {t + f} beyond episode end ({episode.n_frames} frames)"
        )
    frames = range(t - m + 1, t + 1)
    times = episode.frame_timestamps[t - m + 1: t + 1]

    pose = np.zeros((m, 36))
    mask = np.zeros(m)
    bbox = np.zeros((m, 4))
    boxes: list[BBox | None] = []
    for row, frame in enumerate(frames):
        b = episode.bboxes.get(frame)
        boxes.append(b)
        if b is not None:
            bbox[row] = (b.x1, b.y1, b.x2, b.y2)
        p = episode.poses.get(frame)
        if p is not None:
            if b is not None:
                p = purge_pose(p, b)
            kp = np.where(p.valid[:, None], p.keypoints, 0.0)
            pose[row] = kp.reshape(-1)
            mask[row] = 1.0
    speed = _interp_speed(episode.speed, times.astype(np.float64)).reshape(m, 1)

    assignment, _ = sync_sensor_to_frames(episode.sensor, times, cfg.sync_tolerance_ms)
    end = assignment[-1]
    if end + 1 < cfg.sensor_window:
        raise WindowError(
            f"only {end + 1} sensor samples precede frame {t}, need {cfg.sensor_window}"
        )
    sensor = np.stack([s.as_array() for s in episode.sensor[end + 1 - cfg.sensor_window: end + 1]])

    direction = direction_features(episode.gps, boxes, times)
    local = episode.local_ctx[t - m + 1: t + 1].astype(np.float64) / 255.0
    global_ = episode.global_ctx[t - m + 1: t + 1].astype(np.float64) / 255.0
    return ModelInput(
        pose=pose, pose_mask=mask, bbox=bbox, speed=speed,
        local_ctx=local, global_ctx=global_, sensor=sensor,
        direction=direction, label=int(episode.labels[t + f]),
    )


def extract_windows(episode: Episode, cfg: WindowConfig, stride: int = 1,
                    ) -> list[tuple[int, ModelInput]]:
    """All windows of an episode at the given stride, as (t, input) pairs.

    Windows whose sensor history is too short are skipped rather than raised,
    so an episode with a late-starting stream still yields its valid suffix.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    out = []
    for t in range(cfg.m - 1, episode.n_frames - cfg.f, stride):
        try:
            out.append((t, build_window(episode, t, cfg)))
        except WindowError:
            continue
    return out
