"""Peer bookkeeping and first-come-first-serve drop-zone arbitration."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Mapping

from ..fsm.mission import MissionState
from ..geometry import GeoPoint, Rect, geo_to_enu
from .codec import CoordMessage

DEFAULT_STALENESS_TIMEOUT_S = 2.0


@dataclass(frozen=True)
class PeerRecord:
    message: CoordMessage
    received_at: float  # local clock, seconds


@dataclass(frozen=True)
class PeerView:
    message: CoordMessage
    received_at: float
    stale: bool


class PeerTable:
    """Latest message per peer.

    One receiver writes, the state machine reads. Records are immutable and
    swapped whole under a lock, so a reader never sees a half-updated peer.
    """

    def __init__(self, own_id: int, staleness_timeout: float = DEFAULT_STALENESS_TIMEOUT_S):
        self.own_id = own_id
        self.staleness_timeout = staleness_timeout
        self._records: dict[int, PeerRecord] = {}
        self._lock = threading.Lock()

    def update(self, msg: CoordMessage, now: float) -> bool:
        """Store ``msg``; own echoes are ignored. Returns True if stored."""
        if msg.uav_id == self.own_id:
            return False
        rec = PeerRecord(msg, now)
        with self._lock:
            self._records[msg.uav_id] = rec
        return True

    def get(self, uav_id: int) -> PeerRecord | None:
        with self._lock:
            return self._records.get(uav_id)

    def snapshot(self, now: float) -> dict[int, PeerView]:
        with self._lock:
            records = dict(self._records)
        return {
            uid: PeerView(r.message, r.received_at, now - r.received_at > self.staleness_timeout)
            for uid, r in sorted(records.items())
        }

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class Arbitration(enum.Enum):
    Granted = "Granted"
    Denied = "Denied"


@dataclass(frozen=True)
class DropZoneArbiter:
    own_id: int
    drop_zone: Rect
    origin: GeoPoint
    own_request_time: float | None = None  # seconds since mission start
    zone_margin: float = 2.0
    settle_s: float = 0.6

    @property
    def own_request_ms(self) -> int | None:
        if self.own_request_time is None:
            return None
        return int(round(self.own_request_time * 1000.0))

    def with_request(self, t: float | None) -> "DropZoneArbiter":
        return DropZoneArbiter(self.own_id, self.drop_zone, self.origin, t, self.zone_margin, self.settle_s)


def arbitrate(a: DropZoneArbiter, peers: Mapping[int, PeerView], now: float) -> Arbitration:
    """Decide whether this UAV may enter the drop zone now.

    Denied while any fresh peer is dropping, is waiting with an earlier
    request (ties to the lower id), or reports a position inside the
    inflated zone. A grant additionally needs a message from every fresh peer
    received at least ``settle_s`` after our own request, so that a peer who
    asked first but whose news is still in flight cannot be overtaken. Stale
    peers are assumed to be clear of the zone.
    """
    if a.own_request_time is None:
        return Arbitration.Denied
    own_key = (a.own_request_ms, a.own_id)
    zone = a.drop_zone.inflate(a.zone_margin)
    for uid, view in peers.items():
        if view.stale or uid == a.own_id:
            continue
        msg = view.message
        if msg.mission_state is MissionState.Drop:
            return Arbitration.Denied
        if msg.mission_state is MissionState.WaitingToDrop and (msg.timestamp_ms, uid) < own_key:
            return Arbitration.Denied
        if msg.mission_state is not MissionState.Landed:
            pos = geo_to_enu(GeoPoint(msg.lat, msg.lon), a.origin)
            if zone.contains((pos.x, pos.y)):
                return Arbitration.Denied
        if view.received_at < a.own_request_time + a.settle_s:
            return Arbitration.Denied
    return Arbitration.Granted
