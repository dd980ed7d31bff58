import math
import random

import pytest
import shapely.geometry as sg
from shapely.ops import unary_union

from sarsim.geometry import EnuPosition, GeoPoint, Polygon, Rect, distance_point_segment, point_in_polygon
from sarsim.planner import (
    PathCursor,
    PlannerError,
    ScanPath,
    build_field_map,
    cursor_point,
    detour_path,
    generate_scan_path,
    inset_polygon,
    partition_field,
    partition_index,
    resume_point,
    route_around,
)

FIELD = Polygon.rectangle(0, 0, 90, 60)
DROP = Polygon.rectangle(40, 25, 50, 35)


def shoelace(verts) -> float:
    n = len(verts)
    return 0.5 * abs(sum(verts[i][0] * verts[(i + 1) % n][1] - verts[(i + 1) % n][0] * verts[i][1] for i in range(n)))


def path_distance(p, path: ScanPath) -> float:
    if len(path) == 1:
        return math.dist(p, path.waypoints[0].xy())
    return min(distance_point_segment(p, a.xy(), b.xy())[0] for a, b in path.segments())


def test_strip_example():
    parts = partition_field(FIELD, 3)
    assert [p.bounds for p in parts] == [(0, 0, 30, 60), (30, 0, 60, 60), (60, 0, 90, 60)]
    assert all(p.area == 1800 for p in parts)
    assert partition_field(FIELD, 1)[0].bounds == FIELD.bounds


def test_trapezoid_example():
    parts = partition_field(FIELD, 3, "trapezoid")
    for p in parts:
        assert shoelace(p.vertices) == pytest.approx(1800, rel=0.01)
    assert len({round(p.vertices[1][0], 6) for p in parts[:2]}) == 2
    assert not all(p.is_axis_aligned_rectangle() for p in parts)


@pytest.mark.parametrize("n", [0, -2])
def test_partition_count_must_be_positive(n):
    with pytest.raises(PlannerError):
        partition_field(FIELD, n)


def test_partition_rejects_bad_inputs():
    with pytest.raises(PlannerError):
        partition_field(Polygon([(0, 0), (10, 0), (5, 8)]), 2)
    with pytest.raises(PlannerError):
        partition_field(FIELD, 3, "hexagons")
    with pytest.raises(PlannerError):
        partition_field(FIELD, 2, "trapezoid", fan=1.0)


@pytest.mark.parametrize("mode", ["strips", "trapezoid"])
def test_partitions_tile_random_rectangles(mode):
    rng = random.Random(4)
    for _ in range(30):
        w, h = rng.uniform(5, 200), rng.uniform(5, 200)
        x0, y0 = rng.uniform(-50, 50), rng.uniform(-50, 50)
        rect = Polygon.rectangle(x0, y0, x0 + w, y0 + h)
        n = rng.randint(1, 6)
        parts = partition_field(rect, n, mode)
        areas = [shoelace(p.vertices) for p in parts]
        assert max(areas) <= min(areas) * 1.01
        assert sum(areas) == pytest.approx(w * h, rel=1e-9)
        shapes = [sg.Polygon(p.vertices) for p in parts]
        assert unary_union(shapes).symmetric_difference(sg.box(x0, y0, x0 + w, y0 + h)).area < 1e-6
        for _ in range(200):
            pt = (rng.uniform(x0, x0 + w), rng.uniform(y0, y0 + h))
            owners = [i for i, p in enumerate(parts) if point_in_polygon(pt, p)]
            assert owners, pt
            k = partition_index(pt, parts)
            assert k == owners[0]
            # points strictly inside a piece belong to that piece alone
            if all(sg.Polygon(parts[i].vertices).exterior.distance(sg.Point(pt)) > 1e-9 for i in owners):
                assert len(owners) == 1


def test_boundary_point_goes_to_lower_index():
    parts = partition_field(FIELD, 3)
    assert partition_index((30, 10), parts) == 0
    assert partition_index((60, 60), parts) == 1
    assert partition_index((95, 10), parts) is None


def test_scan_path_example():
    path = generate_scan_path(Polygon.rectangle(0, 0, 30, 60), 6, 10, 1)
    assert path.lanes == 5
    assert len(path) == 10
    assert all(w.z == 10 for w in path.waypoints)
    # zig-zag: consecutive lanes run opposite ways
    dirs = [math.copysign(1, b.y - a.y) for a, b in path.segments()[::2]]
    assert all(d1 == -d2 for d1, d2 in zip(dirs, dirs[1:]))


def test_single_lane_when_spacing_exceeds_width():
    path = generate_scan_path(Polygon.rectangle(0, 0, 10, 10), 12, 5, 0)
    assert path.lanes == 1
    assert len(path) == 2


def test_scan_path_validation():
    sq = Polygon.rectangle(0, 0, 10, 10)
    with pytest.raises(PlannerError):
        generate_scan_path(sq, 0, 5)
    with pytest.raises(PlannerError):
        generate_scan_path(sq, 2, 5, -1)
    with pytest.raises(PlannerError):
        generate_scan_path(sq, 2, 5, 5)  # inset swallows the whole square


def test_path_starts_nearest_start_spot():
    part = Polygon.rectangle(0, 0, 30, 60)
    for start in [(0, 0), (30, 0), (0, 60), (30, 60)]:
        path = generate_scan_path(part, 6, 10, 1, start=start)
        first = path.waypoints[0]
        ends = [(w.x, w.y) for w in (path.waypoints[0], path.waypoints[-1])]
        corners = [(3.8, 1), (26.2, 1), (3.8, 59), (26.2, 59)]
        best = min(corners, key=lambda c: math.dist(c, start))
        assert math.dist((first.x, first.y), best) < 1e-9
        assert ends[0] != ends[1]


def test_coverage_example_10k_points():
    part = Polygon.rectangle(0, 0, 30, 60)
    path = generate_scan_path(part, 6, 10, 1)
    rng = random.Random(0)
    for _ in range(10_000):
        p = (rng.uniform(0, 30), rng.uniform(0, 60))
        assert path_distance(p, path) <= 6 / 2 + 1 + 1e-9


def test_coverage_over_random_partitions():
    rng = random.Random(1)
    checked = 0
    while checked < 50:
        w, h = rng.uniform(20, 120), rng.uniform(20, 120)
        n = rng.randint(1, 6)
        mode = rng.choice(["strips", "trapezoid"])
        fan = rng.uniform(0, min(0.9, n / 2 - 0.01))
        part = rng.choice(partition_field(Polygon.rectangle(0, 0, w, h), n, mode, fan))
        spacing, inset = rng.uniform(2, 10), rng.uniform(0, 1.5)
        try:
            path = generate_scan_path(part, spacing, 10, inset)
        except PlannerError:
            continue  # inset too large for a thin piece
        region = inset_polygon(part, inset)
        for wp in path.waypoints:
            assert point_in_polygon(wp.xy(), region)
            assert point_in_polygon(wp.xy(), part)
        x0, y0, x1, y1 = part.bounds
        for _ in range(400):
            p = (rng.uniform(x0, x1), rng.uniform(y0, y1))
            if not point_in_polygon(p, part):
                continue
            d = path_distance(p, path)
            if part.is_axis_aligned_rectangle():
                assert d <= spacing / 2 + inset + 1e-9
            if point_in_polygon(p, region):
                assert d <= spacing / 2 + 1e-9
        checked += 1


def test_inset_polygon():
    sq = Polygon.rectangle(0, 0, 10, 10)
    assert inset_polygon(sq, 1).bounds == pytest.approx((1, 1, 9, 9))
    assert inset_polygon(sq, 0) is sq
    with pytest.raises(PlannerError):
        inset_polygon(Polygon([(0, 0), (10, 0), (10, 10), (5, 2), (0, 10)]), 1)


def _lane_path():
    return generate_scan_path(Polygon.rectangle(0, 0, 30, 60), 6, 10, 1)


def test_resume_at_first_waypoint():
    path = _lane_path()
    assert resume_point(path, path.waypoints[0]) == PathCursor(0, 0.0)


def projection_oracle(p, path):
    """Brute force over a fine sampling of the whole path."""
    best = None
    for i, (a, b) in enumerate(path.segments()):
        for k in range(1001):
            t = k / 1000
            q = (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
            d = math.dist(p, q)
            if best is None or d < best[0] - 1e-12:
                best = (d, i, t)
    return best


def test_resume_mid_lane_three():
    path = _lane_path()
    a, b = path.segments()[4]  # lanes are segments 0, 2, 4, ...
    mid = ((a.x + b.x) / 2, (a.y + b.y) / 2)
    cur = resume_point(path, mid)
    assert cur.index == 4
    assert cur.t == pytest.approx(0.5)
    _, i, t = projection_oracle(mid, path)
    assert (i, t) == (cur.index, pytest.approx(cur.t, abs=1e-3))


def test_resume_matches_projection_oracle():
    path = _lane_path()
    rng = random.Random(8)
    for _ in range(100):
        p = (rng.uniform(-5, 35), rng.uniform(-5, 65))
        cur = resume_point(path, p)
        d_oracle = projection_oracle(p, path)[0]
        assert cursor_point(path, cur).horizontal_distance(p) == pytest.approx(d_oracle, abs=0.07)
        assert cursor_point(path, cur).horizontal_distance(p) <= d_oracle + 1e-9


def test_resume_outside_partition_clamps():
    path = _lane_path()
    cur = resume_point(path, (-40, -40))
    assert cursor_point(path, cur).xy() == pytest.approx(path.waypoints[0].xy())


def test_resume_never_rewinds():
    path = _lane_path()
    after = PathCursor(5, 0.25)
    cur = resume_point(path, path.waypoints[0], after=after)
    assert (cur.index, cur.t) >= (after.index, after.t)


def test_resume_horizon_limits_search():
    path = _lane_path()
    after = PathCursor(0, 0.5)  # halfway up the first lane
    target = path.waypoints[6]  # several lanes ahead
    near = resume_point(path, target, after=after, horizon=5.0)
    walked = 0.0
    segs = path.segments()
    for i in range(after.index, near.index + 1):
        a, b = segs[i]
        t0 = after.t if i == after.index else 0.0
        t1 = near.t if i == near.index else 1.0
        walked += (t1 - t0) * a.horizontal_distance(b)
    assert walked <= 5.0 + 1e-9


def test_route_around_examples():
    box = Rect(10, -5, 20, 5)
    assert route_around((0, 20), (30, 20), box) == [(30, 20)]
    route = route_around((0, 0), (30, 0), box)
    assert route[-1] == (30, 0)
    assert len(route) == 3  # two corners of the box, then the goal
    pts = [(0, 0)] + route
    for a, b in zip(pts, pts[1:]):
        assert not box.segment_crosses_interior(a, b)
    length = sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
    assert length == pytest.approx(2 * math.hypot(10, 5) + 10, rel=1e-6)


def test_route_around_shortest_vs_shapely_visibility():
    rng = random.Random(6)
    box = Rect(-3, -2, 4, 6)
    for _ in range(200):
        a = (rng.uniform(-15, 15), rng.uniform(-15, 15))
        b = (rng.uniform(-15, 15), rng.uniform(-15, 15))
        if box.contains(a) or box.contains(b):
            continue
        route = route_around(a, b, box)
        pts = [a] + list(route)
        inner = sg.box(*box).buffer(-1e-4)
        for p, q in zip(pts, pts[1:]):
            assert not sg.LineString([p, q]).intersects(inner)
        assert sum(math.dist(p, q) for p, q in zip(pts, pts[1:])) >= math.dist(a, b) - 1e-9


def test_detour_path_avoids_keepout_and_keeps_coverage():
    path = generate_scan_path(Polygon.rectangle(30, 0, 60, 60), 6, 10, 1)
    keep = Rect(37, 22, 53, 38)
    out = detour_path(path, keep)
    for a, b in out.segments():
        assert not keep.segment_crosses_interior(a.xy(), b.xy())
    # ground outside the keep-out remains as close to the path as before, up to the hugging error
    rng = random.Random(2)
    for _ in range(2000):
        p = (rng.uniform(30, 60), rng.uniform(0, 60))
        if keep.contains(p):
            continue
        assert path_distance(p, out) <= max(path_distance(p, path), 3 + 1) + 1e-6
    assert out.waypoints[0] == path.waypoints[0]
    assert out.waypoints[-1] == path.waypoints[-1]


def test_field_map_defaults():
    fm = build_field_map(FIELD, DROP, GeoPoint(22.3, 39.1), 3, waiting_offset=6.0)
    assert fm.n_uavs == 3
    assert fm.drop_spot.xy() == (45, 30)
    for i, spot in enumerate(fm.waiting_spots):
        assert not Rect.from_polygon(DROP).contains(spot)
        for other in fm.waiting_spots[i + 1:]:
            assert spot.horizontal_distance(other) >= 5
    assert [h.xy() for h in fm.home_spots] == [(15, 0), (45, 0), (75, 0)]


def test_field_map_rejects_overlap_and_gaps():
    o = GeoPoint(0, 0)
    overlapping = [Polygon.rectangle(0, 0, 45, 60), Polygon.rectangle(40, 0, 85, 60)]
    with pytest.raises(PlannerError):
        build_field_map(FIELD, DROP, o, 2, partitions=overlapping)
    # equal areas, no overlap, but a hole at the right edge
    gappy = [Polygon.rectangle(0, 0, 40, 60), Polygon.rectangle(40, 0, 80, 60)]
    with pytest.raises(PlannerError):
        build_field_map(FIELD, DROP, o, 2, partitions=gappy)
    unequal = [Polygon.rectangle(0, 0, 50, 60), Polygon.rectangle(50, 0, 90, 60)]
    with pytest.raises(PlannerError, match="areas"):
        build_field_map(FIELD, DROP, o, 2, partitions=unequal)


def test_field_map_rejects_bad_spots():
    o = GeoPoint(0, 0)
    with pytest.raises(PlannerError, match="strictly inside"):
        build_field_map(FIELD, Polygon.rectangle(80, 20, 95, 30), o, 3)
    close = [EnuPosition(45, 19, 5), EnuPosition(47, 19, 5), EnuPosition(45, 41, 5)]
    with pytest.raises(PlannerError, match="closer than 5 m"):
        build_field_map(FIELD, DROP, o, 3, waiting_spots=close)
    inside = [EnuPosition(45, 30, 5), EnuPosition(56, 30, 5), EnuPosition(45, 41, 5)]
    with pytest.raises(PlannerError, match="inside the drop zone"):
        build_field_map(FIELD, DROP, o, 3, waiting_spots=inside)
