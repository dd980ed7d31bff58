"""Mission setup, payload objects and the shared world state."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from ..comms.transport import LinkModel
from ..fsm.picking import DescendingCone, PickingConfig
from ..geometry import EnuPosition, Polygon, Rect, distance_point_segment, point_in_polygon
from ..gripper import GripperTiming, PayloadSpec
from ..localization import CalibrationModel
from ..planner import FieldMap, PlannerError
from .kinematics import KinematicLimits, WindModel
from .sensors import SensorConfig


class ObjectStatus(enum.Enum):
    in_field = "in_field"
    carried = "carried"
    in_drop_zone = "in_drop_zone"


@dataclass
class WorldObject:
    obj_id: int
    spec: PayloadSpec
    position: EnuPosition  # top surface of the payload
    status: ObjectStatus = ObjectStatus.in_field
    carrier: int | None = None


@dataclass(frozen=True)
class ScanSettings:
    altitude: float = 8.0
    lane_spacing: float | None = None  # None: derived from the camera footprint
    inset: float = 1.0
    lookahead: float = 3.0
    arrival_tolerance: float = 0.5
    keepout_margin: float = 3.0  # routing clearance around the drop zone


@dataclass(frozen=True)
class GripperSettings:
    success_prob_pick: float = 0.97
    success_prob_drop: float = 1.0
    lift_capacity_g: float = 760.0
    contact_radius: float = 0.1  # horizontal tolerance for the pad to touch the disc
    timing: GripperTiming = GripperTiming()


@dataclass(frozen=True)
class CommsSettings:
    link: LinkModel = LinkModel()
    period_ms: int = 100
    staleness_timeout: float = 2.0
    settle_s: float = 0.6
    zone_margin: float = 2.0
    message_id: int = 222
    log_frames: bool = False


@dataclass(frozen=True)
class FaultSettings:
    bypass_arbitration: bool = False  # every drop request is granted at once


@dataclass(frozen=True)
class MissionSetup:
    """Everything needed to build a world, minus the seed."""

    field_map: FieldMap
    objects: tuple[tuple[PayloadSpec, EnuPosition], ...] | None = None  # None: random per seed
    objects_per_partition: int = 2
    payload: PayloadSpec = PayloadSpec()
    stand_height: float = 0.3
    placement_margin: float = 2.0
    object_separation: float = 3.0
    sensors: SensorConfig = SensorConfig()
    limits: KinematicLimits = KinematicLimits()
    wind: WindModel = WindModel()
    heading: float = 0.0
    body_radius: float = 0.3
    gripper: GripperSettings = GripperSettings()
    comms: CommsSettings = CommsSettings()
    picking: PickingConfig = PickingConfig()
    cone: DescendingCone = DescendingCone()
    max_drop_retries: int = 3
    calibration: CalibrationModel = CalibrationModel()
    scan: ScanSettings = ScanSettings()
    dt: float = 0.05
    time_budget_s: float = 1200.0
    d_min: float = 3.0
    telemetry: str = "picking"  # picking | all | none
    faults: FaultSettings = FaultSettings()

    def __post_init__(self):
        if not 0 < self.dt <= 0.1:
            raise ValueError(f"dt must lie in (0, 0.1], got {self.dt}")
        if self.telemetry not in ("picking", "all", "none"):
            raise ValueError(f"unknown telemetry mode {self.telemetry!r}")
        if self.time_budget_s <= 0:
            raise ValueError("time budget must be positive")

    @property
    def keepout(self) -> Rect:
        return self.field_map.drop_rect.inflate(self.scan.keepout_margin)


def _edge_clearance(pt: tuple[float, float], poly: Polygon) -> float:
    return min(distance_point_segment(pt, a, b)[0] for a, b in poly.edges())


def place_objects(setup: MissionSetup, rng: random.Random) -> list[tuple[PayloadSpec, EnuPosition]]:
    """Random object placement, ``objects_per_partition`` in each partition.

    Objects keep ``placement_margin`` from partition edges, stay clear of the
    routing keep-out by the same margin and are at least
    ``object_separation`` apart.
    """
    keep = setup.keepout.inflate(setup.placement_margin)
    placed: list[tuple[float, float]] = []
    out = []
    for part in setup.field_map.partitions:
        x0, y0, x1, y1 = part.bounds
        for _ in range(setup.objects_per_partition):
            for _attempt in range(10000):
                pt = (rng.uniform(x0, x1), rng.uniform(y0, y1))
                if not point_in_polygon(pt, part) or _edge_clearance(pt, part) < setup.placement_margin:
                    continue
                if keep.contains(pt):
                    continue
                if any(math.hypot(pt[0] - q[0], pt[1] - q[1]) < setup.object_separation for q in placed):
                    continue
                break
            else:
                raise PlannerError("could not place objects with the requested clearances")
            placed.append(pt)
            out.append((setup.payload, EnuPosition(pt[0], pt[1], setup.stand_height)))
    return out


@dataclass
class Violation:
    t: float
    rule: str  # "a": drop-zone exclusion, "b": scan separation
    uavs: tuple[int, ...]
    detail: str = ""


@dataclass
class WorldState:
    setup: MissionSetup
    seed: int
    objects: list[WorldObject]
    agents: list = field(default_factory=list)
    clock: float = 0.0
    tick: int = 0
    violations: list[Violation] = field(default_factory=list)
    log: object = None
    network: object = None

    @property
    def field_map(self) -> FieldMap:
        return self.setup.field_map

    def status_counts(self) -> dict[ObjectStatus, int]:
        counts = {s: 0 for s in ObjectStatus}
        for o in self.objects:
            counts[o.status] += 1
        return counts

    def objects_in_field(self) -> list[WorldObject]:
        return [o for o in self.objects if o.status is ObjectStatus.in_field]

    def all_delivered(self) -> bool:
        return all(o.status is ObjectStatus.in_drop_zone for o in self.objects)


def objects_from_positions(
    positions: Sequence[Sequence[float]], payload: PayloadSpec, stand_height: float
) -> tuple[tuple[PayloadSpec, EnuPosition], ...]:
    return tuple((payload, EnuPosition(p[0], p[1], stand_height)) for p in positions)
