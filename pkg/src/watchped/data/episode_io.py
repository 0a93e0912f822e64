"""Episode directory format: one folder per episode.

    meta.json                 id, fps, n_frames, origin_ms, frame_w, frame_h, lighting
    bboxes.csv                frame,x1,y1,x2,y2,source          (may be sparse)
    poses.csv                 frame,k0x,k0y,k0v,...,k17x,k17y,k17v  (may be sparse)
    sensor.csv                t_ms,ax,ay,az,gx,gy,gz
    gps.csv                   t_ms,lat,lon
    speed.csv                 t_ms,mps
    distance.csv              frame,meters                      (every frame)
    labels.csv                frame,action                      (every frame)
    context/local_%05d.png    8-bit RGB, one per frame
    context/global_%05d.png

CSVs are UTF-8 with a header row.  Floats are written with repr() so that a
parse -> write -> parse cycle reproduces every value bit-for-bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .types import (
    ACTIONS,
    BBox,
    Episode,
    GpsSample,
    ParseError,
    PoseFrame,
    SensorSample,
    SpeedSample,
    N_KEYPOINTS,
)

__all__ = ["parse_episode", "write_episode", "EPISODE_FILES"]

EPISODE_FILES = (
    "meta.json", "bboxes.csv", "poses.csv", "sensor.csv",
    "gps.csv", "speed.csv", "distance.csv", "labels.csv",
)


def _read_rows(path: Path, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    if not path.is_file():
        raise ParseError(f"{path}: file missing")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required") from None
        if header != expected_header:
            raise ParseError(f"{path}: header {header} != expected {expected_header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ParseError(f"{path}:{lineno}: expected {len(expected_header)} fields, got {len(row)}")
            rows.append((lineno, row))
    return rows


def _float(path: Path, lineno: int, text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad {what} value {text!r}") from None
    if not np.isfinite(v):
        raise ParseError(f"{path}:{lineno}: non-finite {what} value {text!r}")
    return v


def _int(path: Path, lineno: int, text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad {what} value {text!r}") from None


def parse_episode(directory) -> Episode:
    """Load and cross-validate one episode directory."""
    root = Path(directory)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise ParseError(f"{meta_path}: file missing")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{meta_path}: invalid JSON ({exc})") from None
    for key in ("id", "fps", "n_frames", "origin_ms", "frame_w", "frame_h", "lighting"):
        if key not in meta:
            raise ParseError(f"{meta_path}: missing key {key!r}")
    n_frames = int(meta["n_frames"])
    frame_w, frame_h = int(meta["frame_w"]), int(meta["frame_h"])
    if n_frames < 1:
        raise ParseError(f"{meta_path}: n_frames must be >= 1, got {n_frames}")

    path = root / "bboxes.csv"
    bboxes: dict[int, BBox] = {}
    for lineno, row in _read_rows(path, ["frame", "x1", "y1", "x2", "y2", "source"]):
        frame = _int(path, lineno, row[0], "frame")
        if not 0 <= frame < n_frames:
            raise ParseError(f"{path}:{lineno}: frame {frame} outside [0,{n_frames})")
        if frame in bboxes:
            raise ParseError(f"{path}:{lineno}: duplicate bbox for frame {frame}")
        coords = [_float(path, lineno, v, "bbox coordinate") for v in row[1:5]]
        try:
            box = BBox(frame, *coords, source=row[5])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if not (0 <= box.x1 and box.x2 <= frame_w and 0 <= box.y1 and box.y2 <= frame_h):
            raise ParseError(f"{path}:{lineno}: bbox outside {frame_w}x{frame_h} frame")
        bboxes[frame] = box

    path = root / "poses.csv"
    pose_header = ["frame"]
    for k in range(N_KEYPOINTS):
        pose_header += [f"k{k}x", f"k{k}y", f"k{k}v"]
    poses: dict[int, PoseFrame] = {}
    for lineno, row in _read_rows(path, pose_header):
        frame = _int(path, lineno, row[0], "frame")
        if not 0 <= frame < n_frames:
            raise ParseError(f"{path}:{lineno}: frame {frame} outside [0,{n_frames})")
        if frame in poses:
            raise ParseError(f"{path}:{lineno}: duplicate pose for frame {frame}")
        kp = np.zeros((N_KEYPOINTS, 2))
        valid = np.zeros(N_KEYPOINTS, dtype=bool)
        for k in range(N_KEYPOINTS):
            kp[k, 0] = _float(path, lineno, row[1 + 3 * k], "keypoint x")
            kp[k, 1] = _float(path, lineno, row[2 + 3 * k], "keypoint y")
            flag = row[3 + 3 * k]
            if flag not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: validity flag must be 0 or 1, got {flag!r}")
            valid[k] = flag == "1"
        poses[frame] = PoseFrame(frame, kp, valid)

    path = root / "sensor.csv"
    sensor: list[SensorSample] = []
    prev_ts = None
    for lineno, row in _read_rows(path, ["t_ms", "ax", "ay", "az", "gx", "gy", "gz"]):
        ts = _int(path, lineno, row[0], "timestamp")
        if prev_ts is not None and ts <= prev_ts:
            raise ParseError(
                f"{path}:{lineno}: timestamp {ts} not strictly increasing (previous {prev_ts})"
            )
        prev_ts = ts
        vals = [_float(path, lineno, v, "sensor") for v in row[1:]]
        sensor.append(SensorSample(ts, *vals))

    path = root / "gps.csv"
    gps: list[GpsSample] = []
    prev_ts = None
    for lineno, row in _read_rows(path, ["t_ms", "lat", "lon"]):
        ts = _int(path, lineno, row[0], "timestamp")
        if prev_ts is not None and ts < prev_ts:
            raise ParseError(f"{path}:{lineno}: timestamp {ts} decreases (previous {prev_ts})")
        prev_ts = ts
        try:
            gps.append(GpsSample(ts, _float(path, lineno, row[1], "latitude"),
                                 _float(path, lineno, row[2], "longitude")))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None

    path = root / "speed.csv"
    speed: list[SpeedSample] = []
    prev_ts = None
    for lineno, row in _read_rows(path, ["t_ms", "mps"]):
        ts = _int(path, lineno, row[0], "timestamp")
        if prev_ts is not None and ts < prev_ts:
            raise ParseError(f"{path}:{lineno}: timestamp {ts} decreases (previous {prev_ts})")
        prev_ts = ts
        try:
            speed.append(SpeedSample(ts, _float(path, lineno, row[1], "speed")))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None

    path = root / "distance.csv"
    distance = np.full(n_frames, np.nan)
    for lineno, row in _read_rows(path, ["frame", "meters"]):
        frame = _int(path, lineno, row[0], "frame")
        if not 0 <= frame < n_frames:
            raise ParseError(f"{path}:{lineno}: frame {frame} outside [0,{n_frames})")
        distance[frame] = _float(path, lineno, row[1], "distance")
    if np.any(np.isnan(distance)):
        missing = int(np.argmax(np.isnan(distance)))
        raise ParseError(f"{path}: no distance for frame {missing}")

    path = root / "labels.csv"
    labels = np.full(n_frames, -1, dtype=np.int64)
    for lineno, row in _read_rows(path, ["frame", "action"]):
        frame = _int(path, lineno, row[0], "frame")
        if not 0 <= frame < n_frames:
            raise ParseError(f"{path}:{lineno}: frame {frame} outside [0,{n_frames})")
        if row[1] not in ACTIONS:
            raise ParseError(f"{path}:{lineno}: unknown action {row[1]!r}")
        labels[frame] = ACTIONS.index(row[1])
    if np.any(labels < 0):
        missing = int(np.argmax(labels < 0))
        raise ParseError(f"{path}: no label for frame {missing}")

    local, global_ = _read_context(root / "context", n_frames)

    try:
        return Episode(
            id=str(meta["id"]), fps=int(meta["fps"]), n_frames=n_frames,
            origin_ms=int(meta["origin_ms"]), frame_w=frame_w, frame_h=frame_h,
            lighting=str(meta["lighting"]), bboxes=bboxes, poses=poses,
            sensor=tuple(sensor), gps=tuple(gps), speed=tuple(speed),
            local_ctx=local, global_ctx=global_, distance_m=distance, labels=labels,
        )
    except ValueError as exc:
        raise ParseError(f"{root}: {exc}") from None


def _read_context(ctx_dir: Path, n_frames: int) -> tuple[np.ndarray, np.ndarray]:
    stacks = []
    for kind in ("local", "global"):
        frames = []
        for i in range(n_frames):
            path = ctx_dir / f"{kind}_{i:05d}.png"
            if not path.is_file():
                raise ParseError(f"{path}: file missing")
            with Image.open(path) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
            if arr.shape[0] != arr.shape[1]:
                raise ParseError(f"{path}: context raster must be square, got {arr.shape}")
            frames.append(arr)
        stack = np.stack(frames)
        if len({f.shape for f in frames}) != 1:
            raise ParseError(f"{ctx_dir}: inconsistent {kind} raster sizes")
        stacks.append(stack)
    if stacks[0].shape != stacks[1].shape:
        raise ParseError(f"{ctx_dir}: local and global raster shapes differ")
    return stacks[0], stacks[1]


def write_episode(episode: Episode, directory) -> Path:
    """Write an episode in the directory layout documented above."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "context").mkdir(exist_ok=True)

    meta = {
        "id": episode.id, "fps": episode.fps, "n_frames": episode.n_frames,
        "origin_ms": episode.origin_ms, "frame_w": episode.frame_w,
        "frame_h": episode.frame_h, "lighting": episode.lighting,
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    def write_csv(name: str, header: list[str], rows) -> None:
        with (root / name).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    write_csv("bboxes.csv", ["frame", "x1", "y1", "x2", "y2", "source"],
              ([b.frame_index, repr(float(b.x1)), repr(float(b.y1)), repr(float(b.x2)),
                repr(float(b.y2)), b.source]
               for b in (episode.bboxes[f] for f in sorted(episode.bboxes))))

    def pose_row(p: PoseFrame):
        row: list = [p.frame_index]
        for k in range(N_KEYPOINTS):
            row += [repr(float(p.keypoints[k, 0])), repr(float(p.keypoints[k, 1])),
                    "1" if p.valid[k] else "0"]
        return row

    header = ["frame"]
    for k in range(N_KEYPOINTS):
        header += [f"k{k}x", f"k{k}y", f"k{k}v"]
    write_csv("poses.csv", header, (pose_row(episode.poses[f]) for f in sorted(episode.poses)))

    write_csv("sensor.csv", ["t_ms", "ax", "ay", "az", "gx", "gy", "gz"],
              ([s.timestamp_ms] + [repr(float(v)) for v in (s.ax, s.ay, s.az, s.gx, s.gy, s.gz)]
               for s in episode.sensor))
    write_csv("gps.csv", ["t_ms", "lat", "lon"],
              ([g.timestamp_ms, repr(float(g.latitude)), repr(float(g.longitude))] for g in episode.gps))
    write_csv("speed.csv", ["t_ms", "mps"],
              ([s.timestamp_ms, repr(float(s.speed_mps))] for s in episode.speed))
    write_csv("distance.csv", ["frame", "meters"],
              ([i, repr(float(episode.distance_m[i]))] for i in range(episode.n_frames)))
    write_csv("labels.csv", ["frame", "action"],
              ([i, ACTIONS[int(episode.labels[i])]] for i in range(episode.n_frames)))

    for kind, stack in (("local", episode.local_ctx), ("global", episode.global_ctx)):
        for i in range(episode.n_frames):
            Image.fromarray(stack[i], mode="RGB").save(root / "context" / f"{kind}_{i:05d}.png")
    return root
