"""Confidence-gated picking sub-machine.

While tracking a detected object the UAV keeps an exponentially averaged
detection confidence. It only descends when that confidence is high and its
lateral error fits inside a cone that narrows toward the object; on low
confidence it climbs back to the altitude where it last saw the object.
Altitudes here are heights above the object's top surface.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from ..geometry import EnuPosition
from ..localization import CalibrationModel, InvalidAltitudeError, detection_to_setpoint
from .events import ObjectDetected, ObjectLost, PickConfirmed, Tick


class PickingMode(enum.Enum):
    LateralTrack = "LateralTrack"
    Descend = "Descend"
    Recover = "Recover"
    Verify = "Verify"
    PickedConfirmed = "PickedConfirmed"
    Aborted = "Aborted"


TERMINAL_MODES = (PickingMode.PickedConfirmed, PickingMode.Aborted)


@dataclass(frozen=True)
class DescendingCone:
    apex_altitude: float = 0.5
    apex_radius: float = 0.10
    top_altitude: float = 8.0
    top_radius: float = 1.5

    def __post_init__(self):
        if not self.top_altitude > self.apex_altitude >= 0:
            raise ValueError("cone needs top_altitude > apex_altitude >= 0")
        if not self.top_radius > self.apex_radius > 0:
            raise ValueError("cone needs top_radius > apex_radius > 0")

    def radius(self, h: float) -> float:
        """Allowed lateral error at height ``h``, clamped to the cone's ends."""
        frac = (h - self.apex_altitude) / (self.top_altitude - self.apex_altitude)
        frac = min(1.0, max(0.0, frac))
        return self.apex_radius + (self.top_radius - self.apex_radius) * frac


@dataclass(frozen=True)
class PickingConfig:
    alpha: float = 0.2
    c_high: float = 0.7
    c_low: float = 0.3
    descent_speed: float = 0.4
    ascent_speed: float = 0.6
    lateral_speed_cap: float = 1.5
    max_recover: int | None = 5  # None means retry forever
    contact_height: float = 0.05
    retry_climb: float = 1.0
    recover_timeout: float = 4.0
    verify_timeout: float = 0.5
    initial_confidence: float = 0.5
    hover_climb_rate: float = 0.1  # descent starts only once climbing has stopped

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.c_low < self.c_high <= 1:
            raise ValueError("need 0 <= c_low < c_high <= 1")


@dataclass(frozen=True)
class PickingState:
    mode: PickingMode = PickingMode.LateralTrack
    confidence: float = 0.5
    last_seen_altitude: float = 0.0
    last_seen_position: EnuPosition | None = None
    z_cmd: float = 0.0  # commanded height above the object top
    recover_count: int = 0
    recover_target: float = 0.0
    seen: bool = False  # detection present in the current frame
    mode_time: float = 0.0  # time spent in the current mode

    @property
    def done(self) -> bool:
        return self.mode in TERMINAL_MODES


@dataclass(frozen=True)
class Pose:
    """What the agent knows about itself when stepping the picking machine."""

    position: EnuPosition  # estimated ENU position
    heading: float
    height: float  # above the object top, from the altitude sensor
    climb_rate: float = 0.0  # vertical speed, positive up


@dataclass(frozen=True)
class Setpoint:
    x: float
    y: float
    height: float  # above the object top
    speed_cap: float


def start_picking(pose: Pose, target: EnuPosition, cfg: PickingConfig) -> PickingState:
    return PickingState(
        mode=PickingMode.LateralTrack,
        confidence=cfg.initial_confidence,
        last_seen_altitude=pose.height,
        last_seen_position=target,
        z_cmd=pose.height,
        seen=True,
    )


def _with_mode(p: PickingState, mode: PickingMode, **kw) -> PickingState:
    return replace(p, mode=mode, mode_time=0.0, **kw)


def lateral_error(p: PickingState, pose: Pose) -> float:
    if p.last_seen_position is None:
        return math.inf
    return math.hypot(p.last_seen_position.x - pose.position.x, p.last_seen_position.y - pose.position.y)


def picking_step(
    p: PickingState,
    event,
    cone: DescendingCone,
    cfg: PickingConfig,
    pose: Pose,
    model: CalibrationModel | None = None,
) -> tuple[PickingState, Setpoint]:
    """Advance the picking machine by one event.

    Per frame the agent sends either ``ObjectDetected`` or ``ObjectLost``
    followed by ``Tick``; ``PickConfirmed`` arrives from the gripper.
    """
    if p.done:
        return p, _setpoint(p, pose, cfg)

    if isinstance(event, PickConfirmed):
        p = _with_mode(p, PickingMode.PickedConfirmed)
        return p, _setpoint(p, pose, cfg)

    if isinstance(event, ObjectDetected):
        target = p.last_seen_position
        if model is not None:
            try:
                target = detection_to_setpoint(
                    event.detection, pose.position, pose.heading, pose.height, model
                )
            except InvalidAltitudeError:
                pass
        p = replace(p, seen=True, last_seen_position=target, last_seen_altitude=pose.height)
        return p, _setpoint(p, pose, cfg)

    if isinstance(event, ObjectLost):
        p = replace(p, seen=False)
        return p, _setpoint(p, pose, cfg)

    if not isinstance(event, Tick):
        return p, _setpoint(p, pose, cfg)

    dt = event.dt
    seen = 1.0 if p.seen else 0.0
    c = (1.0 - cfg.alpha) * p.confidence + cfg.alpha * seen
    c = min(1.0, max(0.0, c))
    p = replace(p, confidence=c, mode_time=p.mode_time + dt)
    err = lateral_error(p, pose)
    mode = p.mode

    if mode in (PickingMode.LateralTrack, PickingMode.Descend) and c <= cfg.c_low:
        p = _enter_recover(p, pose, cfg)
    elif mode is PickingMode.LateralTrack:
        hovering = pose.climb_rate <= cfg.hover_climb_rate
        if c >= cfg.c_high and err < cone.radius(pose.height) and hovering:
            # start from the measured height so the descent never climbs
            p = _with_mode(p, PickingMode.Descend, z_cmd=min(p.z_cmd, pose.height))
            p = replace(p, z_cmd=p.z_cmd - cfg.descent_speed * dt)
    elif mode is PickingMode.Descend:
        if err >= cone.radius(pose.height):
            p = _with_mode(p, PickingMode.LateralTrack)
        elif pose.height <= cfg.contact_height:
            p = _with_mode(p, PickingMode.Verify)
        else:
            p = replace(p, z_cmd=max(p.z_cmd - cfg.descent_speed * dt, -cfg.contact_height))
    elif mode is PickingMode.Verify:
        if p.mode_time >= cfg.verify_timeout:
            # no push-button confirmation: treat as a failed attempt
            p = _enter_recover(p, pose, cfg)
    elif mode is PickingMode.Recover:
        if p.z_cmd < p.recover_target:
            # the timeout only starts once the climb is finished
            z = min(p.recover_target, p.z_cmd + cfg.ascent_speed * dt)
            p = replace(p, z_cmd=z, mode_time=0.0)
        elif c >= cfg.c_high:
            p = _with_mode(p, PickingMode.LateralTrack)
        elif p.mode_time >= cfg.recover_timeout:
            p = _with_mode(p, PickingMode.Aborted)
    return p, _setpoint(p, pose, cfg)


def _enter_recover(p: PickingState, pose: Pose, cfg: PickingConfig) -> PickingState:
    count = p.recover_count + 1
    if cfg.max_recover is not None and count > cfg.max_recover:
        return _with_mode(p, PickingMode.Aborted, recover_count=count)
    z_cmd = max(p.z_cmd, pose.height)
    target = max(p.last_seen_altitude, z_cmd + cfg.retry_climb)
    return _with_mode(p, PickingMode.Recover, recover_count=count, z_cmd=z_cmd, recover_target=target)


def _setpoint(p: PickingState, pose: Pose, cfg: PickingConfig) -> Setpoint:
    tgt = p.last_seen_position or pose.position
    return Setpoint(tgt.x, tgt.y, p.z_cmd, cfg.lateral_speed_cap)
