"""Simulated pedestrian-to-vehicle sensor delivery.

The wearable batches samples into packets; the channel drops, delays and
reorders them; the vehicle-side receiver rebuilds a clean stream and accounts
for what was lost or arrived stale.  Everything runs on a virtual clock
driven by packet send timestamps; nothing reads the wall clock.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data.processing import sync_sensor_to_frames
from ..data.types import GpsSample, SensorSample, SyncError

__all__ = [
    "SensorPacket",
    "DeliveredPacket",
    "ChannelConfig",
    "ChannelStats",
    "packetize",
    "transmit",
    "receive_resync",
    "stats_csv_row",
    "STATS_CSV_HEADER",
]


@dataclass(frozen=True)
class SensorPacket:
    """One transmission unit; the pedestrian id is an opaque anonymous token."""

    sequence_number: int
    pedestrian_id: str
    samples: tuple[SensorSample, ...]
    gps: GpsSample | None
    send_timestamp_ms: int

    def __post_init__(self):
        ts = [s.timestamp_ms for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"packet {self.sequence_number}: samples out of order")


@dataclass(frozen=True)
class DeliveredPacket:
    packet: SensorPacket
    arrival_ms: float


@dataclass(frozen=True)
class ChannelConfig:
    base_latency_ms: float = 0.0
    jitter_ms: float = 0.0          # uniform half-width around the base latency
    loss_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.base_latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency and jitter must be >= 0")
        if not 0.0 <= self.loss_probability < 1.0:
            raise ValueError(f"loss probability must lie in [0,1), got {self.loss_probability}")

    @classmethod
    def from_json(cls, path) -> "ChannelConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            base_latency_ms=float(raw.get("base_latency_ms", 0.0)),
            jitter_ms=float(raw.get("jitter_ms", 0.0)),
            loss_probability=float(raw.get("loss_probability", 0.0)),
            seed=int(raw.get("seed", 0)),
        )


@dataclass
class ChannelStats:
    """Receiver-side accounting for one run.

    ``delivered_fraction`` uses the highest observed sequence number as the
    denominator, so packets lost off the tail are not countable.
    ``max_staleness_ms`` is the worst (arrival time - sample timestamp) over
    delivered samples.  ``stale_frames`` counts frames whose nearest sample
    missed the sync tolerance; with an impaired channel this is reported, not
    raised.
    """

    delivered_fraction: float = 1.0
    max_staleness_ms: float = 0.0
    gap_count: int = 0
    duplicate_count: int = 0
    stale_frames: int = 0


STATS_CSV_HEADER = ["delivered_fraction", "max_staleness_ms", "gap_count",
                    "duplicate_count", "stale_frames"]


def stats_csv_row(stats: ChannelStats) -> list[str]:
    return [f"{stats.delivered_fraction:.6f}", f"{stats.max_staleness_ms:.6f}",
            str(stats.gap_count), str(stats.duplicate_count), str(stats.stale_frames)]


def packetize(stream: Sequence[SensorSample], gps: Sequence[GpsSample],
              batch_size: int, pedestrian_id: str = "anon") -> list[SensorPacket]:
    """Batch samples into packets; every sample lands in exactly one packet.

    The last packet may be short.  A packet is sent when its last sample is
    taken, and each GPS fix rides on the first packet sent at or after it;
    fixes newer than the final packet ride on that final packet.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    packets: list[SensorPacket] = []
    gps_queue = sorted(gps, key=lambda g: g.timestamp_ms)
    gi = 0
    batches = [stream[i:i + batch_size] for i in range(0, len(stream), batch_size)]
    for seq, batch in enumerate(batches):
        send_ts = batch[-1].timestamp_ms
        fix = None
        if gi < len(gps_queue) and (
            gps_queue[gi].timestamp_ms <= send_ts or seq == len(batches) - 1
        ):
            fix = gps_queue[gi]
            gi += 1
        packets.append(SensorPacket(seq, pedestrian_id, tuple(batch), fix, send_ts))
    return packets


def transmit(packets: Sequence[SensorPacket], cfg: ChannelConfig) -> list[DeliveredPacket]:
    """Drop, delay and reorder; deterministic given the config seed.

    Each packet is dropped independently with the loss probability; survivors
    arrive at send time + base latency + uniform(-jitter, +jitter), floored at
    the send time.  The result is sorted by arrival (ties keep send order).
    """
    rng = np.random.default_rng(cfg.seed)
    delivered: list[DeliveredPacket] = []
    for packet in packets:
        drop = rng.random() < cfg.loss_probability
        delay = cfg.base_latency_ms + rng.uniform(-cfg.jitter_ms, cfg.jitter_ms)
        if drop:
            continue
        arrival = packet.send_timestamp_ms + max(0.0, delay)
        delivered.append(DeliveredPacket(packet, arrival))
    delivered.sort(key=lambda d: (d.arrival_ms, d.packet.sequence_number))
    return delivered


def receive_resync(
    delivered: Sequence[DeliveredPacket],
    frame_timestamps: Sequence[int],
    tolerance_ms: int,
) -> tuple[tuple[SensorSample, ...], ChannelStats]:
    """Rebuild a timestamp-ordered, duplicate-free stream and report quality.

    Degradation never raises: frames that cannot be matched within tolerance
    are counted in ``stale_frames``.
    """
    stats = ChannelStats()
    if not delivered:
        return (), ChannelStats(delivered_fraction=0.0, gap_count=0,
                                stale_frames=len(frame_timestamps))
    seen_seq: set[int] = set()
    by_ts: dict[int, SensorSample] = {}
    max_staleness = 0.0
    for item in delivered:
        if item.packet.sequence_number in seen_seq:
            stats.duplicate_count += 1
            continue
        seen_seq.add(item.packet.sequence_number)
        for sample in item.packet.samples:
            staleness = item.arrival_ms - sample.timestamp_ms
            max_staleness = max(max_staleness, staleness)
            if sample.timestamp_ms not in by_ts:
                by_ts[sample.timestamp_ms] = sample
            else:
                stats.duplicate_count += 1
    stream = tuple(by_ts[ts] for ts in sorted(by_ts))
    max_seq = max(seen_seq)
    stats.delivered_fraction = len(seen_seq) / (max_seq + 1)
    stats.gap_count = (max_seq + 1) - len(seen_seq)
    stats.max_staleness_ms = max_staleness

    stale = 0
    for ft in frame_timestamps:
        try:
            sync_sensor_to_frames(stream, [ft], tolerance_ms)
        except SyncError:
            stale += 1
    stats.stale_frames = stale
    return stream, stats
