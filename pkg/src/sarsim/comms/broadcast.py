"""Periodic state broadcast and frame intake."""

from __future__ import annotations

import functools
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable

from ..fsm.mission import MissionState
from ..geometry import EnuPosition, GeoPoint, enu_to_geo
from .codec import DEFAULT_MESSAGE_ID, CodecError, CoordMessage, decode, encode
from .peers import PeerTable

log = logging.getLogger(__name__)

DEFAULT_PERIOD_MS = 100


# every receiver of a broadcast sees the same bytes; decoding is pure
_decode = functools.lru_cache(maxsize=64)(decode)


@dataclass(frozen=True)
class StateSnapshot:
    uav_id: int
    position: EnuPosition
    mission_state: MissionState
    timestamp_ms: int


def snapshot_message(snap: StateSnapshot, origin: GeoPoint) -> CoordMessage:
    geo = enu_to_geo(snap.position, origin)
    return CoordMessage(snap.uav_id, geo.lat, geo.lon, snap.mission_state, snap.timestamp_ms)


class Broadcaster:
    """Sends one frame per period, driven by an external clock.

    Time is tracked in integer milliseconds so the schedule never drifts.
    """

    def __init__(
        self,
        transport,
        origin: GeoPoint,
        period_ms: int = DEFAULT_PERIOD_MS,
        message_id: int = DEFAULT_MESSAGE_ID,
        on_frame: Callable[[bytes, float], None] | None = None,
    ):
        if period_ms <= 0:
            raise ValueError("broadcast period must be positive")
        self.transport = transport
        self.origin = origin
        self.period_ms = period_ms
        self.message_id = message_id
        self.on_frame = on_frame
        self.seq = 0
        self.sent = 0
        self.failures = 0
        self._next_ms = 0

    def due(self, now: float) -> bool:
        return round(now * 1000.0) >= self._next_ms

    def poll(self, now: float, snapshot: Callable[[], StateSnapshot]) -> bytes | None:
        """Send a frame if one is due at ``now``; returns it."""
        now_ms = round(now * 1000.0)
        if now_ms < self._next_ms:
            return None
        self._next_ms += self.period_ms * (1 + (now_ms - self._next_ms) // self.period_ms)
        frame = encode(snapshot_message(snapshot(), self.origin), self.seq, self.message_id)
        self.seq = (self.seq + 1) & 0xFF
        try:
            self.transport.send(frame, now)
            self.sent += 1
        except OSError as exc:
            self.failures += 1
            log.warning("broadcast failed: %s", exc)
        if self.on_frame is not None:
            self.on_frame(frame, now)
        return frame


@dataclass
class ReceiveStats:
    received: int = 0
    corrupt: int = 0
    foreign: int = 0


def receive_into(
    table: PeerTable,
    transport,
    now: float,
    stats: ReceiveStats | None = None,
    on_frame: Callable[[bytes, float, CoordMessage | None], None] | None = None,
) -> list[CoordMessage]:
    """Decode every arrived frame into ``table``; bad frames are counted and dropped."""
    accepted = []
    for frame in transport.receive(now):
        try:
            msg = _decode(bytes(frame))
        except CodecError:
            if stats is not None:
                stats.corrupt += 1
            if on_frame is not None:
                on_frame(frame, now, None)
            continue
        if table.update(msg, now):
            accepted.append(msg)
            if stats is not None:
                stats.received += 1
        elif stats is not None:
            stats.foreign += 1
        if on_frame is not None:
            on_frame(frame, now, msg)
    return accepted


def broadcast_loop(
    snapshot: Callable[[], StateSnapshot],
    transport,
    origin: GeoPoint,
    period_ms: int = DEFAULT_PERIOD_MS,
    stop: threading.Event | None = None,
    max_frames: int | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> Broadcaster:
    """Real-time broadcast until ``stop`` is set or ``max_frames`` are sent."""
    b = Broadcaster(transport, origin, period_ms)
    t0 = clock()
    while not (stop is not None and stop.is_set()):
        if max_frames is not None and b.sent + b.failures >= max_frames:
            break
        now = clock() - t0
        b.poll(now, snapshot)
        sleep(max(0.0, b._next_ms / 1000.0 - (clock() - t0)))
    return b
