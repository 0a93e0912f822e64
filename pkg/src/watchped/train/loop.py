"""Training loops: the two sensor CNNs and the full fused model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import nn
from ..nn import AdamState, Tensor, adam_step, bce_loss, sparse_cce_loss
from ..data.processing import frame_direction_features
from ..data.types import Episode
from ..model.branches import (
    RunContext,
    predict,
    sensor_cnn1_forward,
    sensor_cnn1_logits,
    sensor_cnn2_logits,
    window_probability,
)
from ..model.config import ArchConfig
from ..model.params import Cnn1Params, Cnn2Params, ModelParams
from ..synth.scenario import ACTIVITIES
from .dataset import WindowRecord

__all__ = [
    "TrainConfig",
    "cut_stream_windows",
    "activity_streams",
    "train_sensor_cnn1",
    "evaluate_cnn1",
    "cnn2_training_windows",
    "train_sensor_cnn2",
    "train_full",
    "evaluate_model",
]


@dataclass(frozen=True)
class TrainConfig:
    """Full-model defaults follow the published recipe; the sensor CNN presets
    carry their own learning rates and epoch counts."""

    learning_rate: float = 5e-7
    batch_size: int = 2
    epochs: int = 40
    dropout: float = 0.5
    l2: float = 0.001
    test_split: float = 0.2
    seed: int = 0
    mode: str = "full"

    def __post_init__(self):
        if not 0.0 < self.test_split < 1.0:
            raise ValueError(f"test_split must lie in (0,1), got {self.test_split}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0,1), got {self.dropout}")

    @classmethod
    def cnn1_defaults(cls) -> "TrainConfig":
        return cls(learning_rate=0.001, epochs=15, batch_size=16, dropout=0.0)

    @classmethod
    def cnn2_defaults(cls) -> "TrainConfig":
        return cls(learning_rate=0.005, epochs=100, batch_size=16, dropout=0.0)


# ---- framed stream windowing ----

CNN2_FRAME = 60
CNN2_HOP = 10


def cut_stream_windows(values: np.ndarray, labels: np.ndarray, frame: int,
                       hop: int) -> tuple[np.ndarray, np.ndarray]:
    """Slice [N,...] into overlapping windows of ``frame`` rows every ``hop``.

    Window count is floor((N - frame)/hop) + 1; each window's label is the
    majority of its per-row labels (ties resolve to the highest class index).
    """
    n = len(values)
    if n < frame:
        return np.empty((0, frame, *values.shape[1:])), np.empty(0, dtype=np.int64)
    count = (n - frame) // hop + 1
    xs = np.stack([values[i * hop: i * hop + frame] for i in range(count)])
    ys = np.empty(count, dtype=np.int64)
    for i in range(count):
        window = labels[i * hop: i * hop + frame]
        classes, freq = np.unique(window, return_counts=True)
        best = np.flatnonzero(freq == freq.max())
        ys[i] = int(classes[best[-1]])
    return xs, ys


def activity_streams(episodes: Sequence[Episode],
                     activities: Sequence[Sequence[str]]) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-episode (sensor array [N,6], per-sample activity index [N]).

    Samples before the first frame inherit the first frame's activity, samples
    after the last frame the last frame's.
    """
    out = []
    for episode, acts in zip(episodes, activities):
        if len(acts) != episode.n_frames:
            raise ValueError(
                f"{episode.id}: {len(acts)} activity tags for {episode.n_frames} frames"
            )
        values = np.stack([s.as_array() for s in episode.sensor])
        frame_ts = episode.frame_timestamps
        sample_ts = np.array([s.timestamp_ms for s in episode.sensor])
        idx = np.clip(np.searchsorted(frame_ts, sample_ts, side="right") - 1,
                      0, episode.n_frames - 1)
        labels = np.array([ACTIVITIES.index(acts[i]) for i in idx], dtype=np.int64)
        out.append((values, labels))
    return out


# ---- sensor CNN training ----

def _minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i: i + batch_size]


def train_sensor_cnn1(streams: Sequence[tuple[np.ndarray, np.ndarray]],
                      cfg: TrainConfig, arch: ArchConfig,
                      ) -> tuple[Cnn1Params, list[float]]:
    """Train the activity classifier on framed raw streams.

    Windows are cut with the configured frame size and a hop of half the
    frame.  History holds one mean loss per epoch.
    """
    frame, hop = arch.cnn1_frame, arch.cnn1_frame // 2
    xs, ys = [], []
    for values, labels in streams:
        x, y = cut_stream_windows(values, labels, frame, hop)
        if len(x):
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ValueError(f"no stream is long enough for frame size {frame}")
    X = np.concatenate(xs)
    Y = np.concatenate(ys)
    if len(np.unique(Y)) < 2:
        raise ValueError("activity training data contains a single class")

    rng = np.random.default_rng(cfg.seed)
    params = Cnn1Params.init(rng, arch)
    named = dict(params.named("cnn1"))
    state = AdamState.init(named, learning_rate=cfg.learning_rate)
    history = []
    for _ in range(cfg.epochs):
        epoch_losses = []
        for batch in _minibatches(len(X), cfg.batch_size, rng):
            for p in named.values():
                p.grad = None
            losses = [sparse_cce_loss(sensor_cnn1_logits(X[i], params, arch), int(Y[i]))
                      for i in batch]
            loss = nn.stack(losses).mean()
            loss.backward()
            grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
                     for name, p in named.items()}
            adam_step(named, grads, state)
            epoch_losses.append(float(loss.data))
        history.append(float(np.mean(epoch_losses)))
    return params, history


def evaluate_cnn1(params: Cnn1Params, arch: ArchConfig, X: np.ndarray,
                  Y: np.ndarray) -> float:
    hits = 0
    with nn.no_grad():
        for x, y in zip(X, Y):
            dist = sensor_cnn1_forward(x, params, arch)
            hits += int(np.argmax(dist.data) == y)
    return hits / len(X)


def cnn2_training_windows(episodes: Sequence[Episode], cnn1: Cnn1Params,
                          arch: ArchConfig, frame: int = CNN2_FRAME,
                          hop: int = CNN2_HOP) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-frame (activity distribution + direction) windows with crossing labels.

    The activity distribution for a window comes from the raw sensor slice
    ending at the window's last frame; the label is the action at that frame.
    """
    from ..data.processing import sync_sensor_to_frames

    xs, ys = [], []
    for episode in episodes:
        direction = frame_direction_features(episode)
        frame_ts = episode.frame_timestamps
        assignment, _ = sync_sensor_to_frames(episode.sensor, frame_ts, 20)
        values = np.stack([s.as_array() for s in episode.sensor])
        for start in range(0, episode.n_frames - frame + 1, hop):
            end = start + frame - 1
            sample_end = assignment[end]
            if sample_end + 1 < arch.cnn1_frame:
                continue
            window = values[sample_end + 1 - arch.cnn1_frame: sample_end + 1]
            with nn.no_grad():
                dist = sensor_cnn1_forward(window, cnn1, arch).data
            feats = np.concatenate(
                [np.tile(dist, (frame, 1)), direction[start: end + 1]], axis=1
            )
            xs.append(feats)
            ys.append(int(episode.labels[end]))
    return xs, np.array(ys, dtype=np.int64)


def train_sensor_cnn2(episodes: Sequence[Episode], cnn1: Cnn1Params,
                      cfg: TrainConfig, arch: ArchConfig,
                      ) -> tuple[Cnn2Params, list[float]]:
    """Pretrain the direction encoder as a crossing/not-crossing classifier."""
    xs, ys = cnn2_training_windows(episodes, cnn1, arch)
    if not xs:
        raise ValueError("no usable direction-encoder training windows")
    if len(np.unique(ys)) < 2:
        raise ValueError("direction-encoder training data contains a single class")
    from ..model.branches import _norm_direction

    rng = np.random.default_rng(cfg.seed)
    params = Cnn2Params.init(rng, arch)
    named = dict(params.named("cnn2"))
    state = AdamState.init(named, learning_rate=cfg.learning_rate)
    history = []
    norm = [np.concatenate([x[:, :arch.activity_classes],
                            _norm_direction(x[:, arch.activity_classes:], arch)], axis=1)
            for x in xs]
    for _ in range(cfg.epochs):
        epoch_losses = []
        for batch in _minibatches(len(norm), cfg.batch_size, rng):
            for p in named.values():
                p.grad = None
            losses = [sparse_cce_loss(sensor_cnn2_logits(Tensor(norm[i]), params), int(ys[i]))
                      for i in batch]
            loss = nn.stack(losses).mean()
            loss.backward()
            grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
                     for name, p in named.items()}
            adam_step(named, grads, state)
            epoch_losses.append(float(loss.data))
        history.append(float(np.mean(epoch_losses)))
    return params, history


# ---- full model ----

def train_full(records: Sequence[WindowRecord], cfg: TrainConfig, arch: ArchConfig,
               init_params: ModelParams | None = None,
               cnn1: Cnn1Params | None = None,
               cnn2: Cnn2Params | None = None,
               stop_below: float | None = None,
               ) -> tuple[ModelParams, list[float]]:
    """Minibatch Adam over BCE plus the L2 penalty on the FC head weights.

    History holds the mean batch BCE (penalty excluded) per optimization step.
    When a pretrained activity classifier is supplied it is loaded and frozen;
    everything else trains end to end.  Fully deterministic given the seed.
    ``stop_below`` ends training early once a step's BCE falls under it.
    """
    if not records:
        raise ValueError("empty training dataset")
    params = init_params if init_params is not None else ModelParams.init(arch, cfg.seed)
    if cnn1 is not None:
        params.load_cnn1(cnn1)
    if cnn2 is not None:
        params.load_cnn2(cnn2)
    named = params.named_parameters()
    frozen_prefix = "sensor.cnn1." if cnn1 is not None else None
    trainable = {name: p for name, p in named.items()
                 if frozen_prefix is None or not name.startswith(frozen_prefix)}
    state = AdamState.init(trainable, learning_rate=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    ctx = RunContext(training=True, dropout=cfg.dropout, rng=rng)
    fc_weights = params.fc_weight_tensors()

    history: list[float] = []
    for _ in range(cfg.epochs):
        for batch in _minibatches(len(records), cfg.batch_size, rng):
            for p in named.values():
                p.grad = None
            losses = [
                bce_loss(window_probability(records[i].input, params, cfg.mode, ctx),
                         records[i].label)
                for i in batch
            ]
            data_loss = nn.stack(losses).mean()
            penalty = None
            for w in fc_weights:
                term = (w * w).sum()
                penalty = term if penalty is None else penalty + term
            loss = data_loss + cfg.l2 * penalty
            loss.backward()
            grads = {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
                     for name, p in trainable.items()}
            adam_step(trainable, grads, state)
            history.append(float(data_loss.data))
            if stop_below is not None and history[-1] < stop_below:
                return params, history
    return params, history


def evaluate_model(records: Sequence[WindowRecord], params: ModelParams,
                   mode: str = "full", threshold: float | None = None):
    """Predictions for every window, in record order (evaluation mode)."""
    return [predict(r.input, params, mode, threshold) for r in records]
