"""World construction, the global tick, safety oracles and mission runs."""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass

from ..comms.transport import SimNetwork
from ..fsm.mission import MissionState
from ..geometry import point_in_polygon
from ..missionlog import WORLD_ID, MissionLog
from ..planner import detour_path, generate_scan_path
from .agent import AIRBORNE_Z, Agent
from .sensors import default_lane_spacing
from .world import MissionSetup, ObjectStatus, Violation, WorldObject, WorldState, place_objects

SCAN_ALTITUDE_BAND = 0.5


def lane_spacing_for(setup: MissionSetup) -> float:
    sc = setup.scan
    if sc.lane_spacing is not None:
        return sc.lane_spacing
    return default_lane_spacing(sc.altitude, setup.sensors, setup.calibration)


def build_world(setup: MissionSetup, seed: int, log: MissionLog | None = None) -> WorldState:
    log = log if log is not None else MissionLog()
    if setup.objects is not None:
        placements = list(setup.objects)
    else:
        placements = place_objects(setup, random.Random(f"{seed}:placement"))
    objects = [WorldObject(i + 1, spec, pos) for i, (spec, pos) in enumerate(placements)]
    network = SimNetwork(seed, setup.comms.link)
    world = WorldState(setup, seed, objects, log=log, network=network)
    fm = setup.field_map
    spacing = lane_spacing_for(setup)
    sc = setup.scan
    for i, part in enumerate(fm.partitions):
        uav_id = i + 1
        home = fm.home_spots[i]
        path = generate_scan_path(part, spacing, sc.altitude, sc.inset, start=home)
        path = detour_path(path, setup.keepout)
        agent = Agent(uav_id, part, path, home, fm.waiting_spots[i], setup, network.endpoint(uav_id), seed, log)
        world.agents.append(agent)
    world.min_pair_distance = math.inf
    world.active_violations = set()
    return world


def global_safety_oracle(world: WorldState) -> list[Violation]:
    """Safety conditions violated at this instant.

    (a) more than one airborne UAV inside the drop zone; (b) two UAVs that are
    both scanning height inside their own partitions closer than ``d_min``.
    """
    out = []
    setup = world.setup
    zone = setup.field_map.drop_rect
    inside = [a.id for a in world.agents if a.kin.z > AIRBORNE_Z and zone.contains((a.kin.x, a.kin.y))]
    if len(inside) > 1:
        out.append(Violation(world.clock, "a", tuple(inside), "several UAVs inside the drop zone"))
    alt = setup.scan.altitude
    scanning = [
        a
        for a in world.agents
        if abs(a.kin.z - alt) <= SCAN_ALTITUDE_BAND and point_in_polygon((a.kin.x, a.kin.y), a.partition)
    ]
    for a, b in itertools.combinations(scanning, 2):
        d = math.dist((a.kin.x, a.kin.y, a.kin.z), (b.kin.x, b.kin.y, b.kin.z))
        if d < setup.d_min:
            out.append(Violation(world.clock, "b", (a.id, b.id), f"separation {d:.2f} m"))
    return out


def _track_safety(world: WorldState) -> None:
    current = global_safety_oracle(world)
    keys = set()
    for v in current:
        key = (v.rule, v.uavs)
        keys.add(key)
        if key not in world.active_violations:
            # one record per episode; it stays open while the condition holds
            world.violations.append(v)
            world.log.append(v.t, WORLD_ID, "violation", rule=v.rule, uavs=list(v.uavs), detail=v.detail)
    world.active_violations = keys
    air = [a for a in world.agents if a.kin.z > AIRBORNE_Z]
    for a, b in itertools.combinations(air, 2):
        d = math.dist((a.kin.x, a.kin.y, a.kin.z), (b.kin.x, b.kin.y, b.kin.z))
        if d < world.min_pair_distance:
            world.min_pair_distance = d


def step(world: WorldState, dt: float) -> WorldState:
    """Advance every agent by ``dt`` in id order, then check safety.

    The world is updated in place and returned.
    """
    if not 0 < dt <= 0.1:
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")
    t = world.clock
    for agent in world.agents:
        agent.step(world, t, dt)
    if world.agents:
        _track_safety(world)
    world.tick += 1
    world.clock = round(t + dt, 9)
    return world


def all_landed(world: WorldState) -> bool:
    return all(a.state is MissionState.Landed for a in world.agents)


@dataclass
class MissionResult:
    world: WorldState
    metrics: dict

    @property
    def log(self) -> MissionLog:
        return self.world.log

    @property
    def complete(self) -> bool:
        return self.metrics["complete"]

    @property
    def safe(self) -> bool:
        return self.metrics["drop_zone_violations"] == 0 and self.metrics["separation_violations"] == 0

    @property
    def exit_code(self) -> int:
        if not self.safe:
            return 1
        if not self.complete:
            return 3
        return 0


def collect_metrics(world: WorldState) -> dict:
    agents = world.agents
    counts = world.status_counts()
    landed = all_landed(world)
    complete = landed and world.all_delivered()
    done_at = max((a.landed_at for a in agents), default=0.0) if landed else None
    return {
        "seed": world.seed,
        "complete": complete,
        "completion_time_s": done_at if complete else None,
        "sim_time_s": world.clock,
        "timed_out": not landed,
        "picks_attempted": sum(a.picks_attempted for a in agents),
        "picks_succeeded": sum(a.picks_succeeded for a in agents),
        "objects_total": len(world.objects),
        "objects_delivered": counts[ObjectStatus.in_drop_zone],
        "drop_zone_violations": sum(1 for v in world.violations if v.rule == "a"),
        "separation_violations": sum(1 for v in world.violations if v.rule == "b"),
        "min_pairwise_distance_m": None if math.isinf(world.min_pair_distance) else round(world.min_pair_distance, 6),
        "corrupt_frames": sum(a.rx_stats.corrupt for a in agents),
        "gripper_faults": sum(1 for a in agents if a.fault),
    }


def run_mission(setup: MissionSetup, seed: int, log: MissionLog | None = None) -> MissionResult:
    """Run until every UAV has landed or the sim-time budget runs out."""
    world = build_world(setup, seed, log)
    dt = setup.dt
    budget = setup.time_budget_s
    while world.clock < budget - 1e-9:
        step(world, dt)
        if all_landed(world):
            break
    metrics = collect_metrics(world)
    world.log.append(world.clock, WORLD_ID, "metric", **metrics)
    return MissionResult(world, metrics)
