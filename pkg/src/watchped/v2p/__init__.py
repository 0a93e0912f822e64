"""Simulated lossy pedestrian-to-vehicle sensor channel."""

from .channel import (
    SensorPacket,
    DeliveredPacket,
    ChannelConfig,
    ChannelStats,
    packetize,
    transmit,
    receive_resync,
    stats_csv_row,
    STATS_CSV_HEADER,
)

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
