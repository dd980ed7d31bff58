"""Top-level mission state machine (one instance per UAV)."""

from __future__ import annotations

import enum
from typing import NamedTuple

from .events import (
    ArrivedAtWaypoint,
    DropConfirmed,
    DropFailed,
    DropZoneDenied,
    DropZoneGranted,
    ObjectDetected,
    PickAborted,
    PickConfirmed,
    ScanExhausted,
)

DEFAULT_MAX_DROP_RETRIES = 3


class MissionState(enum.IntEnum):
    """Mission states; the integer value is the wire code."""

    TakeoffAndGoToStart = 1
    ObjectSearch = 2
    ObjectPicking = 3
    GoToDrop = 4
    WaitingToDrop = 5
    Drop = 6
    GoHomeAndLand = 7
    Landed = 8


class Action(enum.Enum):
    START_SCAN = "start_scan"
    ENTER_PICKING = "enter_picking"
    RESUME_SCAN = "resume_scan"
    GO_TO_WAITING_SPOT = "go_to_waiting_spot"
    REQUEST_DROP_ZONE = "request_drop_zone"
    HOLD = "hold"
    GO_TO_DROP_SPOT = "go_to_drop_spot"
    RELEASE = "release"
    ARM_GRIPPER = "arm_gripper"
    GO_HOME = "go_home"
    LAND = "land"
    DISARM = "disarm"
    FAULT = "fault"


class Transition(NamedTuple):
    state: MissionState
    actions: tuple[Action, ...]
    handled: bool


S = MissionState


def transition(
    state: MissionState, event, max_drop_retries: int = DEFAULT_MAX_DROP_RETRIES
) -> Transition:
    """Total transition function; unlisted (state, event) pairs are no-ops."""
    if state is S.TakeoffAndGoToStart:
        if isinstance(event, ArrivedAtWaypoint) and not event.touchdown:
            return Transition(S.ObjectSearch, (Action.START_SCAN,), True)
    elif state is S.ObjectSearch:
        if isinstance(event, ObjectDetected):
            return Transition(S.ObjectPicking, (Action.ENTER_PICKING,), True)
        if isinstance(event, ScanExhausted):
            return Transition(S.GoHomeAndLand, (Action.GO_HOME,), True)
    elif state is S.ObjectPicking:
        if isinstance(event, PickConfirmed):
            return Transition(S.GoToDrop, (Action.GO_TO_WAITING_SPOT,), True)
        if isinstance(event, PickAborted):
            return Transition(S.ObjectSearch, (Action.RESUME_SCAN,), True)
    elif state is S.GoToDrop:
        if isinstance(event, ArrivedAtWaypoint):
            return Transition(S.WaitingToDrop, (Action.REQUEST_DROP_ZONE,), True)
    elif state is S.WaitingToDrop:
        if isinstance(event, DropZoneGranted):
            return Transition(S.Drop, (Action.GO_TO_DROP_SPOT,), True)
        if isinstance(event, DropZoneDenied):
            return Transition(S.WaitingToDrop, (Action.HOLD,), True)
    elif state is S.Drop:
        if isinstance(event, ArrivedAtWaypoint):
            return Transition(S.Drop, (Action.RELEASE,), True)
        if isinstance(event, DropConfirmed):
            return Transition(S.ObjectSearch, (Action.ARM_GRIPPER, Action.RESUME_SCAN), True)
        if isinstance(event, DropFailed):
            if event.attempt < max_drop_retries:
                return Transition(S.Drop, (Action.RELEASE,), True)
            return Transition(S.GoHomeAndLand, (Action.FAULT, Action.GO_HOME), True)
    elif state is S.GoHomeAndLand:
        if isinstance(event, ArrivedAtWaypoint):
            if event.touchdown:
                return Transition(S.Landed, (Action.DISARM,), True)
            return Transition(S.GoHomeAndLand, (Action.LAND,), True)
    return Transition(state, (), False)
