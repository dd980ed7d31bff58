"""Mission and picking state machines."""

from .events import (
    EVENT_TYPES,
    AgentEvent,
    ArrivedAtWaypoint,
    DropConfirmed,
    DropFailed,
    DropZoneDenied,
    DropZoneGranted,
    ObjectDetected,
    ObjectLost,
    PickAborted,
    PickConfirmed,
    ScanExhausted,
    Tick,
    event_name,
)
from .mission import Action, MissionState, Transition, transition
from .picking import (
    DescendingCone,
    PickingConfig,
    PickingMode,
    PickingState,
    Pose,
    Setpoint,
    lateral_error,
    picking_step,
    start_picking,
)
from .scan import ScanStep, advance_cursor, scan_step
