"""Window datasets over episode suites, with episode-granular splitting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data.episode_io import parse_episode
from ..data.processing import extract_windows
from ..data.types import Episode, ModelInput, WindowConfig

__all__ = [
    "WindowRecord",
    "distance_stratum",
    "windows_from_episode",
    "load_suite",
    "split_dataset",
]


def distance_stratum(distance_m: float) -> str:
    """Close is up to 20 m, medium up to 70 m, far beyond."""
    if distance_m <= 20.0:
        return "close"
    if distance_m <= 70.0:
        return "medium"
    return "far"


@dataclass(frozen=True)
class WindowRecord:
    """One window plus the tags the stratified report needs.

    The distance is taken at the last observed frame, which is the frame the
    decision would be made at.
    """

    episode_id: str
    t: int
    lighting: str
    distance_m: float
    input: ModelInput

    @property
    def stratum(self) -> str:
        return distance_stratum(self.distance_m)

    @property
    def label(self) -> int:
        return self.input.label


def windows_from_episode(episode: Episode, cfg: WindowConfig, stride: int) -> list[WindowRecord]:
    return [
        WindowRecord(episode.id, t, episode.lighting, float(episode.distance_m[t]), inp)
        for t, inp in extract_windows(episode, cfg, stride)
    ]


def load_suite(directory) -> list[Episode]:
    """Parse every episode directory under a suite root, sorted by name."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"{root}: not a directory")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "meta.json").is_file())
    if not dirs:
        raise FileNotFoundError(f"{root}: no episode directories found")
    return [parse_episode(p) for p in dirs]


def split_dataset(windows: Sequence[WindowRecord], test_fraction: float,
                  seed: int) -> tuple[list[WindowRecord], list[WindowRecord]]:
    """Split at episode granularity with a seeded shuffle.

    No episode contributes windows to both sides.  The test side receives
    round(n_episodes * test_fraction) episodes, at least one, and at least one
    episode stays in training.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must lie in (0,1), got {test_fraction}")
    ids: list[str] = []
    for w in windows:
        if w.episode_id not in ids:
            ids.append(w.episode_id)
    if len(ids) < 2:
        raise ValueError(f"need windows from >= 2 episodes to split, got {len(ids)}")
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(ids)))
    n_test = int(round(len(ids) * test_fraction))
    n_test = min(max(n_test, 1), len(ids) - 1)
    test_ids = {ids[i] for i in order[:n_test]}
    train = [w for w in windows if w.episode_id not in test_ids]
    test = [w for w in windows if w.episode_id in test_ids]
    return train, test
