import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sarsim.fsm import (
    Action,
    ArrivedAtWaypoint,
    DescendingCone,
    DropConfirmed,
    DropFailed,
    DropZoneDenied,
    DropZoneGranted,
    MissionState,
    ObjectDetected,
    ObjectLost,
    PickAborted,
    PickConfirmed,
    PickingConfig,
    PickingMode,
    PickingState,
    Pose,
    ScanExhausted,
    Tick,
    advance_cursor,
    event_name,
    picking_step,
    scan_step,
    start_picking,
    transition,
)
from sarsim.geometry import EnuPosition, Polygon
from sarsim.localization import PixelDetection
from sarsim.planner import PathCursor, cursor_point, generate_scan_path

S = MissionState
DET = ObjectDetected(PixelDetection(10, 5))

ALL_EVENTS = [
    DET,
    ObjectLost(),
    PickConfirmed(),
    PickAborted(),
    DropConfirmed(),
    DropFailed(1),
    DropFailed(3),
    ArrivedAtWaypoint(),
    ArrivedAtWaypoint(touchdown=True),
    DropZoneGranted(),
    DropZoneDenied(),
    ScanExhausted(),
    Tick(0.05),
]

# the full table of handled pairs; everything else must be a no-op
EXPECTED = {
    (S.TakeoffAndGoToStart, "ArrivedAtWaypoint"): (S.ObjectSearch, (Action.START_SCAN,)),
    (S.ObjectSearch, "ObjectDetected"): (S.ObjectPicking, (Action.ENTER_PICKING,)),
    (S.ObjectSearch, "ScanExhausted"): (S.GoHomeAndLand, (Action.GO_HOME,)),
    (S.ObjectPicking, "PickConfirmed"): (S.GoToDrop, (Action.GO_TO_WAITING_SPOT,)),
    (S.ObjectPicking, "PickAborted"): (S.ObjectSearch, (Action.RESUME_SCAN,)),
    (S.GoToDrop, "ArrivedAtWaypoint"): (S.WaitingToDrop, (Action.REQUEST_DROP_ZONE,)),
    (S.GoToDrop, "ArrivedAtWaypoint(touchdown)"): (S.WaitingToDrop, (Action.REQUEST_DROP_ZONE,)),
    (S.WaitingToDrop, "DropZoneGranted"): (S.Drop, (Action.GO_TO_DROP_SPOT,)),
    (S.WaitingToDrop, "DropZoneDenied"): (S.WaitingToDrop, (Action.HOLD,)),
    (S.Drop, "ArrivedAtWaypoint"): (S.Drop, (Action.RELEASE,)),
    (S.Drop, "ArrivedAtWaypoint(touchdown)"): (S.Drop, (Action.RELEASE,)),
    (S.Drop, "DropConfirmed"): (S.ObjectSearch, (Action.ARM_GRIPPER, Action.RESUME_SCAN)),
    (S.Drop, "DropFailed(1)"): (S.Drop, (Action.RELEASE,)),
    (S.Drop, "DropFailed(3)"): (S.GoHomeAndLand, (Action.FAULT, Action.GO_HOME)),
    (S.GoHomeAndLand, "ArrivedAtWaypoint"): (S.GoHomeAndLand, (Action.LAND,)),
    (S.GoHomeAndLand, "ArrivedAtWaypoint(touchdown)"): (S.Landed, (Action.DISARM,)),
}


def test_transition_table_is_total():
    seen = set()
    for state, event in itertools.product(MissionState, ALL_EVENTS):
        key = (state, event_name(event))
        tr = transition(state, event)
        if key in EXPECTED:
            assert (tr.state, tr.actions) == EXPECTED[key], key
            assert tr.handled
            seen.add(key)
        else:
            assert tr == (state, (), False), key
    assert seen == set(EXPECTED)


def test_transition_examples():
    assert transition(S.ObjectSearch, DET).state is S.ObjectPicking
    tr = transition(S.WaitingToDrop, DropZoneDenied())
    assert tr.state is S.WaitingToDrop and tr.actions == (Action.HOLD,)
    assert transition(S.Landed, DET) == (S.Landed, (), False)


def test_drop_retry_budget():
    assert transition(S.Drop, DropFailed(4), max_drop_retries=5).state is S.Drop
    assert transition(S.Drop, DropFailed(5), max_drop_retries=5).state is S.GoHomeAndLand


def test_reachability_to_landed():
    trace = [
        ArrivedAtWaypoint(),
        DET,
        PickConfirmed(),
        ArrivedAtWaypoint(),
        DropZoneGranted(),
        DropConfirmed(),
        ScanExhausted(),
        ArrivedAtWaypoint(touchdown=True),
    ]
    s = S.TakeoffAndGoToStart
    for ev in trace:
        s = transition(s, ev).state
    assert s is S.Landed


def test_no_drop_without_pick_random_traces():
    rng = random.Random(12)
    for _ in range(10_000):
        s = S.TakeoffAndGoToStart
        holding = False
        for _ in range(40):
            ev = rng.choice(ALL_EVENTS)
            tr = transition(s, ev)
            if tr.state is S.Drop and s is not S.Drop:
                assert holding
            if isinstance(ev, PickConfirmed) and tr.handled:
                holding = True
            if isinstance(ev, DropConfirmed) and tr.handled:
                holding = False
            assert tr.state in MissionState
            s = tr.state


def test_wire_codes():
    assert [int(s) for s in MissionState] == list(range(1, 9))


# --------------------------------------------------------------- picking

EXAMPLE_CONE = DescendingCone(apex_altitude=0.5, apex_radius=0.1, top_altitude=8.0, top_radius=1.0)
CFG = PickingConfig()


def pose(x=0.0, y=0.0, h=3.0, climb=0.0):
    return Pose(EnuPosition(x, y, h), 0.0, h, climb)


def state(mode=PickingMode.LateralTrack, c=0.9, target=(0.0, 0.0), h=3.0, **kw):
    return PickingState(mode=mode, confidence=c, last_seen_position=EnuPosition(*target, h),
                        last_seen_altitude=h, z_cmd=h, seen=True, **kw)


def interp_radius(cone, h):
    frac = min(1.0, max(0.0, (h - cone.apex_altitude) / (cone.top_altitude - cone.apex_altitude)))
    return cone.apex_radius + (cone.top_radius - cone.apex_radius) * frac


def test_cone_radius_example_and_ends():
    assert EXAMPLE_CONE.radius(3.0) == pytest.approx(0.4)
    assert EXAMPLE_CONE.radius(0.5) == 0.1
    assert EXAMPLE_CONE.radius(8.0) == 1.0
    assert EXAMPLE_CONE.radius(-3) == 0.1
    assert EXAMPLE_CONE.radius(30) == 1.0


@given(st.floats(-5, 20), st.floats(-5, 20))
def test_cone_monotone(h1, h2):
    lo, hi = sorted((h1, h2))
    assert EXAMPLE_CONE.radius(lo) <= EXAMPLE_CONE.radius(hi)
    assert EXAMPLE_CONE.radius(h1) == pytest.approx(interp_radius(EXAMPLE_CONE, h1))


def test_cone_validation():
    with pytest.raises(ValueError):
        DescendingCone(apex_altitude=2, top_altitude=1)
    with pytest.raises(ValueError):
        DescendingCone(apex_radius=2, top_radius=1)
    with pytest.raises(ValueError):
        DescendingCone(apex_radius=0)


def test_descend_when_confident_and_inside_cone():
    p = state(target=(0.1, 0.0))
    p2, sp = picking_step(p, Tick(0.1), EXAMPLE_CONE, CFG, pose())
    assert p2.mode is PickingMode.Descend
    assert sp.height < 3.0
    assert sp.height == pytest.approx(3.0 - CFG.descent_speed * 0.1)


def test_low_confidence_recovers_upwards():
    p = state(c=0.1, h=2.0)
    p = PickingState(**{**p.__dict__, "seen": False, "last_seen_altitude": 4.0})
    p2, sp = picking_step(p, Tick(0.1), EXAMPLE_CONE, CFG, pose(h=2.0))
    assert p2.mode is PickingMode.Recover
    assert p2.recover_target >= 4.0
    p3, sp3 = picking_step(p2, Tick(0.1), EXAMPLE_CONE, CFG, pose(h=2.0))
    assert sp3.height > sp.height - 1e-12
    assert sp3.height > 2.0


def test_outside_cone_holds_altitude():
    p = state(target=(0.6, 0.0))
    p2, sp = picking_step(p, Tick(0.1), EXAMPLE_CONE, CFG, pose())
    assert p2.mode is PickingMode.LateralTrack
    assert sp.height == 3.0
    assert (sp.x, sp.y) == (0.6, 0.0)


def test_descent_waits_for_climb_to_stop():
    p = state()
    p2, _ = picking_step(p, Tick(0.1), EXAMPLE_CONE, CFG, pose(climb=0.5))
    assert p2.mode is PickingMode.LateralTrack


def test_pick_confirmed_and_terminal():
    p, _ = picking_step(state(), PickConfirmed(), EXAMPLE_CONE, CFG, pose())
    assert p.mode is PickingMode.PickedConfirmed and p.done
    again, _ = picking_step(p, Tick(0.1), EXAMPLE_CONE, CFG, pose())
    assert again is p


def test_contact_leads_to_verify_then_recover():
    p = state(mode=PickingMode.Descend, h=0.04)
    p, _ = picking_step(p, Tick(0.05), EXAMPLE_CONE, CFG, pose(h=0.04))
    assert p.mode is PickingMode.Verify
    for _ in range(int(CFG.verify_timeout / 0.05) + 1):
        p, _ = picking_step(p, Tick(0.05), EXAMPLE_CONE, CFG, pose(h=0.04))
    assert p.mode is PickingMode.Recover
    assert p.recover_count == 1


def test_retry_budget_exhausted_aborts():
    cfg = PickingConfig(max_recover=2)
    p = state(c=0.0)
    p = PickingState(**{**p.__dict__, "seen": False})
    for _ in range(400):
        p, _ = picking_step(p, ObjectLost(), EXAMPLE_CONE, cfg, pose())
        p, _ = picking_step(p, Tick(0.1), EXAMPLE_CONE, cfg, pose())
        if p.done:
            break
    assert p.mode is PickingMode.Aborted


def test_detection_updates_target_via_calibration():
    from sarsim.localization import CalibrationModel

    m = CalibrationModel()
    p = start_picking(pose(h=m.h_c), EnuPosition(0, 0, 0), CFG)
    p2, sp = picking_step(p, ObjectDetected(PixelDetection(100, 0)), EXAMPLE_CONE, CFG, pose(h=m.h_c), m)
    assert sp.x == pytest.approx(0.4927966)
    assert p2.seen


@given(st.lists(st.booleans(), max_size=300), st.floats(0, 1))
def test_confidence_stays_in_unit_interval(seen_seq, c0):
    p = PickingState(confidence=c0, last_seen_position=EnuPosition(5, 5, 3), z_cmd=3.0, last_seen_altitude=3.0)
    cfg = PickingConfig(max_recover=None)
    for seen in seen_seq:
        p, _ = picking_step(p, DET if seen else ObjectLost(), EXAMPLE_CONE, cfg, pose(h=3.0))
        p, _ = picking_step(p, Tick(0.05), EXAMPLE_CONE, cfg, pose(h=3.0))
        assert 0.0 <= p.confidence <= 1.0


def test_ema_matches_closed_form():
    p = PickingState(confidence=0.5, last_seen_position=EnuPosition(5, 5, 3), z_cmd=3.0)
    for _ in range(5):
        p, _ = picking_step(p, DET, EXAMPLE_CONE, CFG, pose(h=3.0))
        p, _ = picking_step(p, Tick(0.05), EXAMPLE_CONE, CFG, pose(h=3.0))
    assert p.confidence == pytest.approx(1 - 0.5 * 0.8**5)


def test_recover_never_descends_random():
    rng = random.Random(3)
    cfg = PickingConfig(max_recover=None)
    for _ in range(200):
        h = rng.uniform(0.1, 6)
        p = PickingState(confidence=rng.random(), last_seen_position=EnuPosition(0, 0, 0),
                         z_cmd=h, last_seen_altitude=rng.uniform(0.1, 8))
        prev = None
        for _ in range(100):
            seen = rng.random() < 0.5
            target = (rng.gauss(0, 0.3), rng.gauss(0, 0.3))
            ps = pose(*target, h=max(0.0, p.z_cmd + rng.gauss(0, 0.05)))
            p, sp = picking_step(p, DET if seen else ObjectLost(), EXAMPLE_CONE, cfg, ps)
            p, sp = picking_step(p, Tick(0.05), EXAMPLE_CONE, cfg, ps)
            if p.mode is PickingMode.Recover:
                if prev is not None:
                    assert sp.height >= prev - 1e-12
                prev = sp.height
            else:
                prev = None


def test_picking_config_validation():
    with pytest.raises(ValueError):
        PickingConfig(alpha=0)
    with pytest.raises(ValueError):
        PickingConfig(c_low=0.8, c_high=0.7)


# ------------------------------------------------------------------ scan

PART = Polygon.rectangle(0, 0, 30, 60)
PATH = generate_scan_path(PART, 6, 8, 1)


def test_scan_no_detections_moves_ahead():
    start = PATH.waypoints[0]
    step = scan_step(PATH, PathCursor(0, 0.0), start.xy(), PART)
    assert step.event is None
    assert step.cursor > PathCursor(0, 0.0)
    assert step.setpoint.horizontal_distance(start) == pytest.approx(3.0)


def test_scan_detection_inside_partition():
    est = EnuPosition(10, 10, 0)
    step = scan_step(PATH, PathCursor(0, 0.0), PATH.waypoints[0].xy(), PART, [(PixelDetection(1, 2), est)])
    assert isinstance(step.event, ObjectDetected)
    assert step.target == est


def test_scan_boundary_detection_counts_as_own():
    est = EnuPosition(30, 10, 0)
    step = scan_step(PATH, PathCursor(0, 0.0), PATH.waypoints[0].xy(), PART, [(PixelDetection(1, 2), est)])
    assert isinstance(step.event, ObjectDetected)


def test_scan_ignores_neighbour_detections():
    outside = EnuPosition(31, 10, 0)
    inside = EnuPosition(29, 11, 0)
    step = scan_step(PATH, PathCursor(0, 0.0), PATH.waypoints[0].xy(), PART,
                     [(PixelDetection(1, 2), outside), (PixelDetection(3, 4), inside)])
    assert step.target == inside
    assert step.ignored == (outside,)
    only_out = scan_step(PATH, PathCursor(0, 0.0), PATH.waypoints[0].xy(), PART, [(PixelDetection(1, 2), outside)])
    assert only_out.event is None and only_out.ignored == (outside,)


def test_scan_exhausted_at_end():
    last = PathCursor(len(PATH) - 1, 0.0)
    end = PATH.waypoints[-1]
    assert isinstance(scan_step(PATH, last, end.xy(), PART).event, ScanExhausted)
    assert scan_step(PATH, last, (end.x + 2, end.y), PART).event is None


def test_advance_cursor_never_rewinds_and_waits_for_stragglers():
    cur = PathCursor(2, 0.5)
    far = (100.0, 100.0)
    assert advance_cursor(PATH, cur, far, 3.0) == cur
    pos = cursor_point(PATH, cur)
    nxt = advance_cursor(PATH, cur, pos.xy(), 3.0)
    assert nxt >= cur
    assert cursor_point(PATH, nxt).horizontal_distance(pos) == pytest.approx(3.0)


def test_following_the_cursor_traverses_the_whole_path():
    pos = PATH.waypoints[0].xy()
    cur = PathCursor(0, 0.0)
    for _ in range(10_000):
        step = scan_step(PATH, cur, pos, PART)
        if isinstance(step.event, ScanExhausted):
            break
        cur = step.cursor
        dx, dy = step.setpoint.x - pos[0], step.setpoint.y - pos[1]
        d = (dx * dx + dy * dy) ** 0.5
        move = min(d, 0.5)
        pos = (pos[0] + dx / d * move, pos[1] + dy / d * move) if d else pos
    else:
        pytest.fail("scan never finished")
    assert cur.index == len(PATH) - 1
