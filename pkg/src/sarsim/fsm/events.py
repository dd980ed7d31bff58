"""Events consumed by the mission and picking state machines."""

from __future__ import annotations

from dataclasses import dataclass

from ..localization import PixelDetection


@dataclass(frozen=True)
class ObjectDetected:
    detection: PixelDetection


@dataclass(frozen=True)
class ObjectLost:
    pass


@dataclass(frozen=True)
class PickConfirmed:
    pass


@dataclass(frozen=True)
class PickAborted:
    pass


@dataclass(frozen=True)
class DropConfirmed:
    pass


@dataclass(frozen=True)
class DropFailed:
    attempt: int  # 1-based count of failed releases so far


@dataclass(frozen=True)
class ArrivedAtWaypoint:
    touchdown: bool = False


@dataclass(frozen=True)
class DropZoneGranted:
    pass


@dataclass(frozen=True)
class DropZoneDenied:
    pass


@dataclass(frozen=True)
class ScanExhausted:
    pass


@dataclass(frozen=True)
class Tick:
    dt: float


AgentEvent = (
    ObjectDetected
    | ObjectLost
    | PickConfirmed
    | PickAborted
    | DropConfirmed
    | DropFailed
    | ArrivedAtWaypoint
    | DropZoneGranted
    | DropZoneDenied
    | ScanExhausted
    | Tick
)

EVENT_TYPES = (
    ObjectDetected,
    ObjectLost,
    PickConfirmed,
    PickAborted,
    DropConfirmed,
    DropFailed,
    ArrivedAtWaypoint,
    DropZoneGranted,
    DropZoneDenied,
    ScanExhausted,
    Tick,
)


def event_name(event) -> str:
    name = type(event).__name__
    if isinstance(event, ArrivedAtWaypoint) and event.touchdown:
        return "ArrivedAtWaypoint(touchdown)"
    if isinstance(event, DropFailed):
        return f"DropFailed({event.attempt})"
    return name
