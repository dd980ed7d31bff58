"""Run configuration: YAML schema, line-precise diagnostics, MissionSetup builder."""

from __future__ import annotations

import math
import os
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .comms.transport import LinkModel
from .fsm.picking import DescendingCone, PickingConfig
from .geometry import EnuPosition, GeoPoint, GeometryError, Polygon, geo_to_enu, signed_area
from .gripper import GripperTiming, PayloadSpec
from .localization import CalibrationModel, LocalizationError
from .planner import PlannerError, build_field_map, partition_field
from .sim.kinematics import KinematicLimits, WindModel
from .sim.sensors import SensorConfig
from .sim.world import (
    CommsSettings,
    FaultSettings,
    GripperSettings,
    MissionSetup,
    ScanSettings,
    objects_from_positions,
)
from .vision import ColorThresholds

ENV_VAR = "SARSIM_CONFIG"

LatLon = tuple[float, float]
LatLonAlt = tuple[float, float, float]
Triple = tuple[int, int, int]


class ConfigError(ValueError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    def __init__(self, msg: str, path: str | None = None, line: int | None = None):
        self.msg = msg
        self.path = path
        self.line = line
        where = path or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {msg}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PartitionsSection(_Section):
    mode: Literal["strips", "trapezoid"] = "strips"
    fan: float = Field(0.5, ge=0.0, le=1.0)
    polygons: list[list[LatLon]] | None = None  # explicit partitions override the mode


class FieldSection(_Section):
    origin: LatLon | None = None  # defaults to the south-west corner
    corners: list[LatLon]
    drop_zone: list[LatLon]
    partitions: PartitionsSection = PartitionsSection()

    @field_validator("corners", "drop_zone")
    @classmethod
    def _three_or_more(cls, v):
        if len(v) < 3:
            raise ValueError("a polygon needs at least 3 corners")
        return v


class UavSection(_Section):
    count: int = Field(3, ge=1, le=16)
    waiting_spots: list[LatLonAlt] | None = None
    home_spots: list[LatLon] | None = None
    waiting_offset_m: float = Field(6.0, gt=0)
    waiting_altitude_m: float = Field(5.0, gt=0)
    max_speed_xy: float = Field(3.0, gt=0)
    max_speed_z: float = Field(1.0, gt=0)
    max_accel: float = Field(2.0, gt=0)
    kp: float = Field(1.0, gt=0)
    heading_deg: float = 0.0
    body_radius_m: float = Field(0.3, ge=0)


class ObjectsSection(_Section):
    per_partition: int = Field(2, ge=0)
    placements: list[LatLon] | None = None  # fixed positions instead of seeded placement
    mass_g: float = 500.0
    radius_m: float = 0.05
    ferrous: bool = True
    stand_height_m: float = Field(0.3, ge=0)
    placement_margin_m: float = Field(2.0, ge=0)
    separation_m: float = Field(3.0, ge=0)


class SensorsSection(_Section):
    gps_noise_sigma: float = 0.3
    gps_noise_tau: float = 10.0
    lidar_noise_sigma: float = 0.02
    detection_fov_deg: float = 170.0
    per_frame_detection_prob: float = 0.9
    pixel_noise_sigma: float = 1.0
    image_width: int = 640
    image_height: int = 480


class WindSection(_Section):
    mean: tuple[float, float] = (0.0, 0.0)
    gust: float = Field(0.0, ge=0)


class GripperSection(_Section):
    success_prob_pick: float = Field(0.97, ge=0, le=1)
    success_prob_drop: float = Field(1.0, ge=0, le=1)
    lift_capacity_g: float = Field(760.0, gt=0)
    contact_radius_m: float = Field(0.1, gt=0)
    release_pulse_s: float = Field(0.2, gt=0)
    cycle_s: float = Field(0.5, gt=0)


class CommsSection(_Section):
    loss: float = Field(0.0, ge=0, le=1)
    latency_s: float = Field(0.0, ge=0)
    jitter_s: float = Field(0.0, ge=0)
    period_ms: int = Field(100, ge=1)
    staleness_timeout_s: float = Field(2.0, gt=0)
    settle_s: float = Field(0.6, ge=0)
    zone_margin_m: float = Field(2.0, ge=0)
    message_id: int = Field(222, ge=0, le=255)
    log_frames: bool = False


class PickingSection(_Section):
    alpha: float = 0.2
    c_high: float = 0.7
    c_low: float = 0.3
    descent_speed: float = 0.4
    ascent_speed: float = 0.6
    lateral_speed_cap: float = 1.5
    max_recover: int | None = 5
    contact_height: float = 0.05
    retry_climb: float = 1.0
    recover_timeout: float = 4.0
    verify_timeout: float = 0.5
    initial_confidence: float = 0.5
    hover_climb_rate: float = 0.1


class ConeSection(_Section):
    apex_altitude: float = 0.5
    apex_radius: float = 0.10
    top_altitude: float = 8.0
    top_radius: float = 1.5


class FsmSection(_Section):
    max_drop_retries: int = Field(3, ge=0)
    picking: PickingSection = PickingSection()
    cone: ConeSection = ConeSection()


class PlannerSection(_Section):
    scan_altitude_m: float = Field(8.0, gt=0)
    lane_spacing_m: float | None = Field(None, gt=0)
    inset_m: float = Field(1.0, ge=0)
    lookahead_m: float = Field(3.0, gt=0)
    arrival_tolerance_m: float = Field(0.5, gt=0)
    keepout_margin_m: float = Field(3.0, ge=0)


class CalibrationSection(_Section):
    a: float = CalibrationModel.a
    b: float = CalibrationModel.b
    h_c: float = 5.0
    units: Literal["cm", "m", "mm"] = "cm"


class ColorSection(_Section):
    # [[lo, lo, lo], [hi, hi, hi]] per color space, 8-bit channels
    rgb: tuple[Triple, Triple]
    hls: tuple[Triple, Triple]
    lab: tuple[Triple, Triple]


class SimSection(_Section):
    dt: float = Field(0.05, gt=0, le=0.1)
    time_budget_s: float = Field(1200.0, gt=0)
    d_min_m: float = Field(3.0, gt=0)
    telemetry: Literal["picking", "all", "none"] = "picking"


class FaultsSection(_Section):
    bypass_arbitration: bool = False
    bypass_seeds: list[int] | None = None  # restrict the bypass to these seeds


class RunConfig(_Section):
    field: FieldSection
    uavs: UavSection = UavSection()
    objects: ObjectsSection = ObjectsSection()
    sensors: SensorsSection = SensorsSection()
    wind: WindSection = WindSection()
    gripper: GripperSection = GripperSection()
    comms: CommsSection = CommsSection()
    fsm: FsmSection = FsmSection()
    planner: PlannerSection = PlannerSection()
    calibration: CalibrationSection = CalibrationSection()
    colors: dict[str, ColorSection] = {}
    sim: SimSection = SimSection()
    faults: FaultsSection = FaultsSection()

    @model_validator(mode="after")
    def _counts(self):
        n = self.uavs.count
        if self.uavs.waiting_spots is not None and len(self.uavs.waiting_spots) != n:
            raise ValueError(f"uavs.waiting_spots needs {n} entries")
        if self.uavs.home_spots is not None and len(self.uavs.home_spots) != n:
            raise ValueError(f"uavs.home_spots needs {n} entries")
        polys = self.field.partitions.polygons
        if polys is not None and len(polys) != n:
            raise ValueError(f"field.partitions.polygons needs {n} entries")
        return self


# --------------------------------------------------------------------------
# Loading


def _node_line(root: yaml.Node | None, loc: tuple) -> int | None:
    """1-based line of the deepest YAML node reachable along ``loc``."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_config(text: str, path: str | None = None) -> RunConfig:
    """Parse YAML text into a validated :class:`RunConfig`."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", path,
                          mark.line + 1 if mark is not None else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", path, 1)
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        dotted = ".".join(str(p) for p in loc) or "<root>"
        if err["type"] == "extra_forbidden":
            msg = f"unknown key {dotted}"
        else:
            msg = f"{dotted}: {err['msg']}"
        more = len(exc.errors()) - 1
        if more:
            msg += f" (and {more} more)"
        raise ConfigError(msg, path, _node_line(root, loc)) from None
    try:
        build_setup(cfg)
    except _LocatedError as exc:
        raise ConfigError(exc.msg, path, _node_line(root, exc.loc)) from None
    return cfg


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Load ``path``, else ``$SARSIM_CONFIG``, else the packaged default."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        text = default_config_text()
        return parse_config(text, "default.yaml")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config(text, str(p))


def default_config_text() -> str:
    return resources.files("sarsim").joinpath("data/default.yaml").read_text(encoding="utf-8")


# --------------------------------------------------------------------------
# Building the mission


class _LocatedError(ConfigError):
    def __init__(self, msg: str, loc: tuple):
        super().__init__(msg)
        self.loc = loc


def _enu(p: LatLon, origin: GeoPoint, z: float = 0.0) -> EnuPosition:
    e = geo_to_enu(GeoPoint(p[0], p[1]).validate(), origin, z)
    # micrometer rounding keeps shared corner coordinates exactly equal
    return EnuPosition(round(e.x, 6), round(e.y, 6), z)


def _polygon(pts: list[LatLon], origin: GeoPoint, loc: tuple) -> Polygon:
    try:
        verts = [_enu(p, origin)[:2] for p in pts]
        if signed_area(verts) < 0:
            verts.reverse()
        return Polygon(verts)
    except GeometryError as exc:
        raise _LocatedError(str(exc), loc) from None


def color_thresholds(cfg: RunConfig) -> list[ColorThresholds]:
    return [ColorThresholds(name, c.rgb, c.hls, c.lab) for name, c in cfg.colors.items()]


def field_origin(cfg: RunConfig) -> GeoPoint:
    f = cfg.field
    if f.origin is not None:
        return GeoPoint(*f.origin)
    return GeoPoint(min(c[0] for c in f.corners), min(c[1] for c in f.corners))


def build_setup(cfg: RunConfig, seed: int | None = None) -> MissionSetup:
    """Translate a config into a :class:`MissionSetup`.

    ``seed`` only matters for ``faults.bypass_seeds``. Module-level invariant
    failures surface as :class:`ConfigError` carrying the offending key path.
    """
    f = cfg.field
    try:
        origin = field_origin(cfg)
        GeoPoint(*origin).validate()
    except GeometryError as exc:
        raise _LocatedError(str(exc), ("field", "origin")) from None
    area = _polygon(f.corners, origin, ("field", "corners"))
    drop = _polygon(f.drop_zone, origin, ("field", "drop_zone"))
    u = cfg.uavs
    part_cfg = f.partitions
    try:
        if part_cfg.polygons is not None:
            parts = [
                _polygon(p, origin, ("field", "partitions", "polygons", i)) for i, p in enumerate(part_cfg.polygons)
            ]
        else:
            parts = partition_field(area, u.count, part_cfg.mode, part_cfg.fan)
        waiting = None
        if u.waiting_spots is not None:
            waiting = [_enu((w[0], w[1]), origin, w[2]) for w in u.waiting_spots]
        homes = None
        if u.home_spots is not None:
            homes = [_enu(h, origin) for h in u.home_spots]
        fm = build_field_map(
            area, drop, origin, u.count, part_cfg.mode, parts, waiting, homes,
            u.waiting_offset_m, u.waiting_altitude_m,
        )
    except (PlannerError, GeometryError) as exc:
        raise _LocatedError(str(exc), ("field", "partitions")) from None

    o = cfg.objects
    sec = "objects"
    try:
        payload = PayloadSpec(o.mass_g, o.radius_m, o.ferrous)
        placements = None
        if o.placements is not None:
            pts = [_enu(p, origin)[:2] for p in o.placements]
            placements = objects_from_positions(pts, payload, o.stand_height_m)
        sec = "sensors"
        s = cfg.sensors
        sensors = SensorConfig(
            s.gps_noise_sigma, s.gps_noise_tau, s.lidar_noise_sigma, s.detection_fov_deg,
            s.per_frame_detection_prob, s.pixel_noise_sigma, s.image_width, s.image_height,
        )
        sec = "uavs"
        limits = KinematicLimits(u.max_speed_xy, u.max_speed_z, u.max_accel, u.kp)
        sec = "gripper"
        g = cfg.gripper
        gripper = GripperSettings(
            g.success_prob_pick, g.success_prob_drop, g.lift_capacity_g, g.contact_radius_m,
            GripperTiming(g.release_pulse_s, g.cycle_s),
        )
        sec = "comms"
        c = cfg.comms
        comms = CommsSettings(
            LinkModel(c.loss, c.latency_s, c.jitter_s), c.period_ms, c.staleness_timeout_s,
            c.settle_s, c.zone_margin_m, c.message_id, c.log_frames,
        )
        sec = "fsm"
        picking = PickingConfig(**cfg.fsm.picking.model_dump())
        cone = DescendingCone(**cfg.fsm.cone.model_dump())
        sec = "calibration"
        cal = CalibrationModel(**cfg.calibration.model_dump())
        sec = "colors"
        color_thresholds(cfg)
        sec = "planner"
        p = cfg.planner
        scan = ScanSettings(
            p.scan_altitude_m, p.lane_spacing_m, p.inset_m, p.lookahead_m, p.arrival_tolerance_m, p.keepout_margin_m
        )
        sec = "faults"
        fa = cfg.faults
        bypass = fa.bypass_arbitration and (fa.bypass_seeds is None or seed is None or seed in fa.bypass_seeds)
        sec = "sim"
        sm = cfg.sim
        return MissionSetup(
            field_map=fm,
            objects=placements,
            objects_per_partition=o.per_partition,
            payload=payload,
            stand_height=o.stand_height_m,
            placement_margin=o.placement_margin_m,
            object_separation=o.separation_m,
            sensors=sensors,
            limits=limits,
            wind=WindModel(tuple(cfg.wind.mean), cfg.wind.gust),
            heading=math.radians(u.heading_deg),
            body_radius=u.body_radius_m,
            gripper=gripper,
            comms=comms,
            picking=picking,
            cone=cone,
            max_drop_retries=cfg.fsm.max_drop_retries,
            calibration=cal,
            scan=scan,
            dt=sm.dt,
            time_budget_s=sm.time_budget_s,
            d_min=sm.d_min_m,
            telemetry=sm.telemetry,
            faults=FaultSettings(bypass),
        )
    except (ValueError, LocalizationError, GeometryError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise _LocatedError(str(exc), (sec,)) from None


def config_to_yaml(data: dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False)
