"""Deterministic discrete-time mission simulator."""

from .agent import Agent
from .engine import (
    MissionResult,
    all_landed,
    build_world,
    collect_metrics,
    global_safety_oracle,
    lane_spacing_for,
    run_mission,
    step,
)
from .kinematics import KinematicLimitError, KinematicLimits, UavKinematics, WindDrift, WindModel
from .sensors import (
    GaussMarkovGps,
    SensorConfig,
    default_lane_spacing,
    footprint_half_extents,
    project_to_pixels,
    synthesize_detection,
)
from .world import (
    CommsSettings,
    FaultSettings,
    GripperSettings,
    MissionSetup,
    ObjectStatus,
    ScanSettings,
    Violation,
    WorldObject,
    WorldState,
    objects_from_positions,
    place_objects,
)
