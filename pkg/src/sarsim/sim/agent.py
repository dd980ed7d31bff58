"""One simulated UAV: sensors, state machines, gripper and radio."""

from __future__ import annotations

import math
import random

from ..comms.broadcast import Broadcaster, ReceiveStats, StateSnapshot, receive_into
from ..comms.peers import Arbitration, DropZoneArbiter, PeerTable, arbitrate
from ..fsm.events import (
    ArrivedAtWaypoint,
    DropConfirmed,
    DropFailed,
    DropZoneDenied,
    DropZoneGranted,
    ObjectDetected,
    ObjectLost,
    PickAborted,
    PickConfirmed,
    Tick,
    event_name,
)
from ..fsm.mission import Action, MissionState, transition
from ..fsm.picking import PickingMode, Pose, picking_step, start_picking
from ..fsm.scan import scan_step
from ..geometry import EnuPosition, Polygon, point_in_polygon
from ..gripper import GripperState, arm_for_pick, attempt_pick, command_release
from ..localization import InvalidAltitudeError, detection_to_setpoint
from ..planner import PathCursor, ScanPath, cursor_point, resume_point, route_around
from .kinematics import UavKinematics, WindDrift
from .sensors import GaussMarkovGps, lidar_altitude, synthesize_detection
from .world import ObjectStatus, WorldObject

S = MissionState
TOUCHDOWN_Z = 0.02
Z_TOLERANCE = 0.3
AIRBORNE_Z = 0.1


def _r(v: float) -> float:
    return round(v, 6)


class Agent:
    def __init__(
        self,
        uav_id: int,
        partition: Polygon,
        path: ScanPath,
        home: EnuPosition,
        waiting_spot: EnuPosition,
        setup,
        endpoint,
        seed,
        log,
    ):
        self.id = uav_id
        self.partition = partition
        self.path = path
        self.home = home
        self.waiting_spot = waiting_spot
        self.setup = setup
        self.log = log
        fm = setup.field_map
        self.drop_spot = fm.drop_spot
        self.keepout = setup.keepout

        def rng(name: str) -> random.Random:
            return random.Random(f"{seed}:{name}:{uav_id}")

        self.rng_camera = rng("camera")
        self.rng_lidar = rng("lidar")
        self.rng_gripper = rng("gripper")
        sc = setup.sensors
        self.gps = GaussMarkovGps(sc.gps_noise_sigma, sc.gps_noise_tau, rng("gps"))
        self.wind = WindDrift(setup.wind, rng("wind"))
        self.kin = UavKinematics(home, setup.heading, setup.limits)

        g = setup.gripper
        self.gripper = GripperState(
            success_prob_pick=g.success_prob_pick,
            success_prob_drop=g.success_prob_drop,
            lift_capacity_g=g.lift_capacity_g,
            timing=g.timing,
        )
        self.release_until: float | None = None

        c = setup.comms
        self.endpoint = endpoint
        self.peers = PeerTable(uav_id, c.staleness_timeout)
        self.rx_stats = ReceiveStats()
        on_tx = self._log_tx if c.log_frames else None
        self._on_rx = self._log_rx if c.log_frames else None
        self.broadcaster = Broadcaster(endpoint, fm.origin, c.period_ms, c.message_id, on_tx)
        self.arbiter = DropZoneArbiter(
            uav_id, fm.drop_rect, fm.origin, None, c.zone_margin, c.settle_s
        )

        self.state = S.TakeoffAndGoToStart
        self.cursor = PathCursor(0, 0.0)
        self.picking = None
        self.carrying: WorldObject | None = None
        self.last_object_loc: tuple[float, float] | None = None
        self.drop_attempts = 0
        self.released = False
        self.landing = False
        self.fault = False
        self.hold_logged = False
        self.last_ignored_t = -math.inf
        self.in_verify = False
        self.verify_tried = False
        self.transit = False

        self.picks_attempted = 0
        self.picks_succeeded = 0
        self.landed_at: float | None = None

        # current destination, in the estimated frame
        self.route: list[EnuPosition] = []
        self.dest = EnuPosition(home.x, home.y, path.scan_altitude)
        self.target = (home.x, home.y, home.z)
        self.speed_cap: float | None = None
        self.est_x = home.x
        self.est_y = home.y
        self.h_meas = home.z
        self._set_destination(path.waypoints[0])

    # ------------------------------------------------------------------ utils

    @property
    def airborne(self) -> bool:
        return self.kin.z > AIRBORNE_Z

    def snapshot(self, t: float) -> StateSnapshot:
        req = self.arbiter.own_request_ms
        ts = req if self.state is S.WaitingToDrop and req is not None else round(t * 1000.0)
        return StateSnapshot(self.id, EnuPosition(self.est_x, self.est_y, self.kin.z), self.state, ts)

    def _log_tx(self, frame: bytes, now: float) -> None:
        self.log.append(now, self.id, "comms_tx", frame=frame.hex())

    def _log_rx(self, frame: bytes, now: float, msg) -> None:
        self.log.append(now, self.id, "comms_rx", frame=frame.hex(), ok=msg is not None)

    def _set_destination(
        self, dest: EnuPosition, avoid: bool = True, transit_z: float | None = None, climb_first: bool = False
    ) -> None:
        """Plan a route to ``dest``; corners of the route are flown at ``transit_z``."""
        self.dest = dest
        z = dest.z if transit_z is None else transit_z
        route = []
        if climb_first:
            route.append(EnuPosition(self.est_x, self.est_y, z))
        if avoid:
            pts = route_around((self.est_x, self.est_y), (dest.x, dest.y), self.keepout)
            route += [EnuPosition(x, y, z) for x, y in pts[:-1]]
        if transit_z is not None and abs(transit_z - dest.z) > Z_TOLERANCE:
            route.append(EnuPosition(dest.x, dest.y, z))
        self.route = route

    def _follow_route(self) -> bool:
        """Steer toward the destination; True once it is reached."""
        tol = self.setup.scan.arrival_tolerance
        while self.route:
            r = self.route[0]
            if math.hypot(r.x - self.est_x, r.y - self.est_y) <= tol * 2.0 and abs(r.z - self.kin.z) <= Z_TOLERANCE * 2.0:
                self.route.pop(0)
                continue
            self.target = (r.x, r.y, r.z)
            return False
        d = self.dest
        self.target = (d.x, d.y, d.z)
        return math.hypot(d.x - self.est_x, d.y - self.est_y) <= tol and abs(d.z - self.kin.z) <= Z_TOLERANCE

    def _fire(self, t: float, event) -> None:
        old = self.state
        tr = transition(old, event, self.setup.max_drop_retries)
        if not tr.handled:
            return
        hold = tr.actions == (Action.HOLD,)
        if not hold or not self.hold_logged:
            self.log.append(
                t,
                self.id,
                "state_transition",
                old=old.name,
                new=tr.state.name,
                event=event_name(event),
                actions=[a.value for a in tr.actions],
            )
        self.hold_logged = hold
        self.state = tr.state
        for action in tr.actions:
            self._do(t, action)

    def _do(self, t: float, action: Action) -> None:
        scan_alt = self.path.scan_altitude
        if action is Action.START_SCAN:
            self.cursor = PathCursor(0, 0.0)
            self.route = []
            self.transit = False
        elif action is Action.ENTER_PICKING:
            pass  # the picking machine is created by the caller
        elif action is Action.RESUME_SCAN:
            self.picking = None
            if self.last_object_loc is not None:
                horizon = 2.0 * self.setup.scan.lookahead
                self.cursor = resume_point(self.path, self.last_object_loc, self.cursor, horizon)
            p = cursor_point(self.path, self.cursor)
            # after a drop, climb out of the zone before any lateral move
            self._set_destination(EnuPosition(p.x, p.y, scan_alt), climb_first=self.released)
            self.released = False
            self.transit = True  # fly back before following the path again
        elif action is Action.GO_TO_WAITING_SPOT:
            self.picking = None
            self._set_destination(self.waiting_spot, transit_z=self.path.scan_altitude)
        elif action is Action.REQUEST_DROP_ZONE:
            self.arbiter = self.arbiter.with_request(t)
        elif action is Action.HOLD:
            self.target = (self.waiting_spot.x, self.waiting_spot.y, self.waiting_spot.z)
        elif action is Action.GO_TO_DROP_SPOT:
            self.released = False
            self.drop_attempts = 0
            self._set_destination(self.drop_spot, avoid=False)
        elif action is Action.RELEASE:
            self._release(t)
        elif action is Action.ARM_GRIPPER:
            self.arbiter = self.arbiter.with_request(None)
        elif action is Action.GO_HOME:
            self.picking = None
            self.arbiter = self.arbiter.with_request(None)
            z = max(self.kin.z, self.path.scan_altitude)
            self._set_destination(EnuPosition(self.home.x, self.home.y, z), climb_first=True)
        elif action is Action.LAND:
            self.landing = True
            # aim slightly below ground so touchdown does not crawl in
            self._set_destination(EnuPosition(self.home.x, self.home.y, -0.2), avoid=False)
        elif action is Action.DISARM:
            self.landed_at = t
            k = self.kin
            k.vx = k.vy = k.vz = 0.0
        elif action is Action.FAULT:
            self.fault = True

    def _release(self, t: float) -> None:
        if self.release_until is not None:
            self.gripper = arm_for_pick(self.gripper)
        was = self.gripper.feedback
        self.gripper, fb = command_release(self.gripper, self.rng_gripper)
        self.release_until = t + self.gripper.timing.release_pulse_s
        self.released = True
        edge = "1->0" if was == 1 and fb == 0 else ""
        self.log.append(t, self.id, "gripper", action="release", feedback=fb, edge=edge)

    # --------------------------------------------------------------- sensing

    def _camera(self, world):
        objs = [o.position for o in world.objects if o.status is ObjectStatus.in_field]
        if not objs:
            return None
        k = self.kin
        return synthesize_detection(
            (k.x, k.y, k.z), k.heading, objs, self.setup.sensors, self.setup.calibration, self.rng_camera
        )

    def _localize(self, det, height: float):
        try:
            return detection_to_setpoint(
                det, EnuPosition(self.est_x, self.est_y, self.kin.z), self.kin.heading, height, self.setup.calibration
            )
        except InvalidAltitudeError:
            return None

    def _contact(self, world) -> WorldObject | None:
        k = self.kin
        g = self.setup.gripper
        for o in world.objects:
            if o.status is not ObjectStatus.in_field:
                continue
            p = o.position
            if math.hypot(p.x - k.x, p.y - k.y) <= g.contact_radius and k.z - p.z <= self.setup.picking.contact_height + 1e-9:
                return o
        return None

    def _floor(self, world) -> float:
        k = self.kin
        if self.carrying is None and k.z < self.setup.stand_height + 1.0:
            reach = self.setup.body_radius
            for o in world.objects:
                if o.status is ObjectStatus.in_field:
                    p = o.position
                    if abs(p.x - k.x) <= reach + o.spec.radius and abs(p.y - k.y) <= reach + o.spec.radius:
                        if math.hypot(p.x - k.x, p.y - k.y) <= reach + o.spec.radius:
                            return p.z
        return 0.0

    # ------------------------------------------------------------------ step

    def step(self, world, t: float, dt: float) -> None:
        k = self.kin
        ex, ey = self.gps.step(dt)
        self.est_x, self.est_y = k.x + ex, k.y + ey
        self.h_meas = lidar_altitude(k.z, self.setup.sensors.lidar_noise_sigma, self.rng_lidar)

        if self.release_until is not None and t >= self.release_until - 1e-9:
            self.gripper = arm_for_pick(self.gripper)
            self.release_until = None
            if self.state is S.Drop and self.gripper.engaged and self.released:
                self.drop_attempts += 1
                self._fire(t, DropFailed(self.drop_attempts))

        receive_into(self.peers, self.endpoint, t, self.rx_stats, self._on_rx)

        state = self.state
        if state is S.TakeoffAndGoToStart:
            if self._follow_route():
                self._fire(t, ArrivedAtWaypoint())
        elif state is S.ObjectSearch:
            self._search(world, t)
        elif state is S.ObjectPicking:
            self._pick(world, t, dt)
        elif state is S.GoToDrop:
            if self._follow_route():
                self._fire(t, ArrivedAtWaypoint())
        elif state is S.WaitingToDrop:
            self.target = (self.waiting_spot.x, self.waiting_spot.y, self.waiting_spot.z)
            if self.setup.faults.bypass_arbitration:
                verdict = Arbitration.Granted
            else:
                verdict = arbitrate(self.arbiter, self.peers.snapshot(t), t)
            self._fire(t, DropZoneGranted() if verdict is Arbitration.Granted else DropZoneDenied())
        elif state is S.Drop:
            if self._follow_route() and not self.released:
                self._fire(t, ArrivedAtWaypoint())
            if self.released and self.carrying is not None and not self.gripper.engaged:
                obj = self.carrying
                obj.status = ObjectStatus.in_drop_zone
                obj.carrier = None
                obj.position = EnuPosition(k.x, k.y, 0.0)
                self.carrying = None
                self._fire(t, DropConfirmed())
        elif state is S.GoHomeAndLand:
            if self._follow_route():
                if not self.landing:
                    self._fire(t, ArrivedAtWaypoint())
                elif k.z <= TOUCHDOWN_Z:
                    self._fire(t, ArrivedAtWaypoint(touchdown=True))

        if self.state is not S.Landed:
            tx, ty, tz = self.target
            drift = self.wind.step(dt)
            k.track(tx - ex, ty - ey, tz, dt, self.speed_cap, drift, self._floor(world))
        if self.setup.telemetry == "all" and self.state is not S.ObjectPicking:
            self.log.append(
                t, self.id, "setpoint", state=self.state.name, mode="", altitude=_r(self.h_meas),
                height=_r(self.h_meas), distance=-1.0, confidence=0.0,
                x=_r(self.target[0]), y=_r(self.target[1]), z=_r(self.target[2]),
            )
        if self.carrying is not None:
            self.carrying.position = EnuPosition(k.x, k.y, max(0.0, k.z - 0.05))
        self.broadcaster.poll(t, lambda: self.snapshot(t))

    def _search(self, world, t: float) -> None:
        sc = self.setup.scan
        stand = self.setup.stand_height
        dets = []
        det = self._camera(world)
        if det is not None:
            est = self._localize(det, self.h_meas - stand)
            if est is not None:
                dets.append((det, est))
        self.speed_cap = None
        res = scan_step(self.path, self.cursor, (self.est_x, self.est_y), self.partition, dets, sc.lookahead, sc.arrival_tolerance)
        if res.ignored and t - self.last_ignored_t >= 1.0:
            self.last_ignored_t = t
            e = res.ignored[0]
            self.log.append(t, self.id, "detection", x=_r(e.x), y=_r(e.y), accepted=False)
        if isinstance(res.event, ObjectDetected):
            tgt = res.target
            self.log.append(
                t, self.id, "detection",
                x=_r(tgt.x), y=_r(tgt.y), px=_r(det.x_pixels), py=_r(det.y_pixels), accepted=True,
            )
            self.last_object_loc = (tgt.x, tgt.y)
            pose = Pose(EnuPosition(self.est_x, self.est_y, self.kin.z), self.kin.heading, self.h_meas - stand, self.kin.vz)
            self._fire(t, res.event)
            self.picking = start_picking(pose, tgt, self.setup.picking)
            self.in_verify = False
            self.route = []
            self.target = (self.est_x, self.est_y, self.kin.z)
            return
        if self.transit:
            if self._follow_route():
                self.transit = False
            return
        self.cursor = res.cursor
        sp = res.setpoint
        self.target = (sp.x, sp.y, sp.z)
        if res.event is not None:
            self._fire(t, res.event)

    def _pick(self, world, t: float, dt: float) -> None:
        s = self.setup
        stand = s.stand_height
        k = self.kin
        pose = Pose(EnuPosition(self.est_x, self.est_y, k.z), k.heading, self.h_meas - stand, k.vz)
        det = self._camera(world)
        ev = ObjectDetected(det) if det is not None else ObjectLost()
        p, _ = picking_step(self.picking, ev, s.cone, s.picking, pose, s.calibration)
        p, sp = picking_step(p, Tick(dt), s.cone, s.picking, pose, s.calibration)
        if p.mode is PickingMode.Verify:
            if not self.in_verify:
                self.verify_tried = False
            obj = self._contact(world)
            if obj is not None and not self.verify_tried:
                # one grab per touchdown, on the first tick the pad is pressed
                self.verify_tried = True
                self.gripper, fb = attempt_pick(self.gripper, True, obj.spec, self.rng_gripper)
                self.picks_attempted += 1
                self.log.append(t, self.id, "gripper", action="pick", contact=True, feedback=fb, edge="0->1" if fb else "")
                if fb:
                    self.picks_succeeded += 1
                    obj.status = ObjectStatus.carried
                    obj.carrier = self.id
                    self.carrying = obj
                    p, sp = picking_step(p, PickConfirmed(), s.cone, s.picking, pose, s.calibration)
        elif self.in_verify and not self.verify_tried:
            self.log.append(t, self.id, "gripper", action="pick", contact=False, feedback=0, edge="")
        self.in_verify = p.mode is PickingMode.Verify
        self.picking = p
        self.target = (sp.x, sp.y, stand + sp.height)
        self.speed_cap = sp.speed_cap
        if s.telemetry != "none":
            tgt = p.last_seen_position
            dist = math.hypot(tgt.x - self.est_x, tgt.y - self.est_y) if tgt is not None else -1.0
            self.log.append(
                t, self.id, "setpoint",
                state=self.state.name, mode=p.mode.value, altitude=_r(self.h_meas),
                height=_r(pose.height), distance=_r(dist), confidence=_r(p.confidence),
                x=_r(sp.x), y=_r(sp.y), z=_r(stand + sp.height),
            )
        if p.mode is PickingMode.PickedConfirmed:
            self.speed_cap = None
            self._fire(t, PickConfirmed())
        elif p.mode is PickingMode.Aborted:
            self.speed_cap = None
            self._fire(t, PickAborted())
