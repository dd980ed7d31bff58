"""Field partitioning, zig-zag scan paths and the per-UAV named spots."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .geometry import (
    EnuPosition,
    GeoPoint,
    Point,
    Polygon,
    Rect,
    distance_point_segment,
    point_in_polygon,
)


class PlannerError(ValueError):
    pass


# --------------------------------------------------------------------------
# Partitioning


def partition_field(
    search_area: Polygon, n: int, mode: str = "strips", fan: float = 0.5
) -> list[Polygon]:
    """Split an axis-aligned rectangle into ``n`` equal-area convex pieces.

    ``strips`` cuts it into vertical strips. ``trapezoid`` tilts every interior
    boundary by shifting its bottom end one way and its top end the other by
    the same amount, which keeps each piece's area at exactly 1/n.
    """
    if n <= 0:
        raise PlannerError(f"partition count must be positive, got {n}")
    if not search_area.is_axis_aligned_rectangle():
        raise PlannerError("search area must be an axis-aligned rectangle")
    x0, y0, x1, y1 = search_area.bounds
    width = x1 - x0
    cuts = [x0 + width * i / n for i in range(n + 1)]
    if mode == "strips":
        shifts = [0.0] * (n + 1)
    elif mode == "trapezoid":
        if n > 1 and not 0.0 <= fan < n / 2.0:
            raise PlannerError(f"fan must lie in [0, {n / 2}), got {fan}")
        shifts = [fan * (width / n) * (n - 2 * i) / n for i in range(n + 1)]
        shifts[0] = shifts[n] = 0.0
    else:
        raise PlannerError(f"unknown partition mode {mode!r}")
    parts = []
    for i in range(n):
        b0, b1 = cuts[i] + shifts[i], cuts[i + 1] + shifts[i + 1]
        t0, t1 = cuts[i] - shifts[i], cuts[i + 1] - shifts[i + 1]
        if i == 0:
            b0 = t0 = x0
        if i == n - 1:
            b1 = t1 = x1
        parts.append(Polygon([(b0, y0), (b1, y0), (t1, y1), (t0, y1)]))
    return parts


def partition_index(pt: Sequence[float], partitions: Sequence[Polygon]) -> int | None:
    """Index of the first partition containing ``pt`` (boundaries go to the lower index)."""
    for i, part in enumerate(partitions):
        if point_in_polygon(pt, part):
            return i
    return None


def is_convex(poly: Polygon) -> bool:
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy = verts[(i + 2) % n]
        if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) < -1e-12:
            return False
    return True


def inset_polygon(poly: Polygon, inset: float) -> Polygon:
    """Shrink a convex polygon by moving every edge inward by ``inset``."""
    if inset == 0.0:
        return poly
    if not is_convex(poly):
        raise PlannerError("inset requires a convex polygon")
    lines = []
    for (ax, ay), (bx, by) in poly.edges():
        dx, dy = bx - ax, by - ay
        length = math.hypot(dx, dy)
        nx, ny = -dy / length, dx / length  # inward normal for CCW order
        lines.append(((ax + nx * inset, ay + ny * inset), (dx, dy)))
    verts = []
    n = len(lines)
    for i in range(n):
        (p, d), (q, e) = lines[i - 1], lines[i]
        denom = d[0] * e[1] - d[1] * e[0]
        if abs(denom) < 1e-12:
            continue
        t = ((q[0] - p[0]) * e[1] - (q[1] - p[1]) * e[0]) / denom
        verts.append((p[0] + t * d[0], p[1] + t * d[1]))
    try:
        shrunk = Polygon(verts)
    except ValueError as exc:
        raise PlannerError(f"inset {inset} m collapses the partition") from exc
    if shrunk.area >= poly.area:
        raise PlannerError(f"inset {inset} m collapses the partition")
    return shrunk


# --------------------------------------------------------------------------
# Scan paths


@dataclass(frozen=True)
class ScanPath:
    waypoints: tuple[EnuPosition, ...]
    lane_spacing: float
    scan_altitude: float
    lanes: int = 0

    def __len__(self) -> int:
        return len(self.waypoints)

    def segments(self):
        w = self.waypoints
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    def length(self) -> float:
        return sum(a.horizontal_distance(b) for a, b in self.segments())


def _lane_interval(poly: Polygon, u: float, axis: int) -> tuple[float, float] | None:
    """Extent along the lane axis of the line ``coord[1-axis] == u`` inside ``poly``."""
    other = 1 - axis
    hits = []
    for a, b in poly.edges():
        ua, ub = a[other], b[other]
        if (ua - u) * (ub - u) > 0:
            continue
        if ua == ub:
            hits.extend([a[axis], b[axis]])
        else:
            t = (u - ua) / (ub - ua)
            hits.append(a[axis] + t * (b[axis] - a[axis]))
    if not hits:
        return None
    return min(hits), max(hits)


def _min_crossing_sine(region: Polygon, axis: int) -> float:
    """Sine of the shallowest angle any non-parallel edge makes with the lanes."""
    best = 1.0
    for a, b in region.edges():
        length = math.hypot(b[0] - a[0], b[1] - a[1])
        across = abs(b[1 - axis] - a[1 - axis]) / length
        if across > 1e-9:
            best = min(best, across)
    return best


def _lanes(region: Polygon, axis: int, max_step: float) -> list[tuple[float, tuple[float, float]]]:
    # beyond a lane end a slanted wall recedes by (step/2)/sin; cap the step so that stays within reach
    max_step *= _min_crossing_sine(region, axis)
    other = 1 - axis
    rb = region.bounds
    u_lo, u_hi = rb[other], rb[other + 2]
    span = u_hi - u_lo
    n_lanes = max(1, math.ceil(span / max_step - 1e-9))
    step = span / n_lanes
    lanes = []
    for k in range(n_lanes):
        u = u_lo + (k + 0.5) * step
        iv = _lane_interval(region, u, axis)
        if iv is not None:
            lanes.append((u, iv))
    return lanes


def _clean(region: Polygon, axis: int, lanes) -> bool:
    """True when no vertex falls strictly between the outer lanes.

    A lone lane must instead reach both ends of the region.

    Then every lane spans the region wall to wall and the strip between two
    neighbours is a plain quadrilateral, which the zig-zag covers.
    """
    if len(lanes) == 1:
        vs = [v[axis] for v in region.vertices]
        v0, v1 = lanes[0][1]
        return v0 <= min(vs) + 1e-9 and v1 >= max(vs) - 1e-9
    lo, hi = lanes[0][0], lanes[-1][0]
    return all(not (lo + 1e-9 < v[1 - axis] < hi - 1e-9) for v in region.vertices)


def generate_scan_path(
    partition: Polygon,
    lane_spacing: float,
    scan_altitude: float,
    inset: float = 0.0,
    start: Sequence[float] | None = None,
) -> ScanPath:
    """Boustrophedon path over a convex partition.

    Lanes run parallel to the longer side of the partition's bounding box and
    are spread evenly across the shorter side of the inset region, with just
    enough of them that no point of the inset region is farther than
    ``lane_spacing / 2`` from the path, and no point of a rectangular
    partition farther than ``lane_spacing / 2 + inset``. Slanted walls get
    proportionally closer lanes. If some vertex would fall
    between lanes (a slanted trapezoid), the lanes turn to the other axis so
    each one still runs wall to wall. The path starts at whichever outer lane
    endpoint is closest to ``start``.
    """
    if not lane_spacing > 0:
        raise PlannerError("lane spacing must be positive")
    if inset < 0:
        raise PlannerError("inset must be non-negative")
    region = inset_polygon(partition, inset)
    bx0, by0, bx1, by1 = partition.bounds
    longer = 1 if (by1 - by0) >= (bx1 - bx0) else 0
    # a corner of the partition sits inset across and inset along from the
    # nearest lane end, so keep hypot(inset + step/2, inset) <= spacing/2 + inset
    half = math.sqrt((inset + lane_spacing / 2.0) ** 2 - inset**2) - inset
    choice = None
    for axis in (longer, 1 - longer):
        lanes = _lanes(region, axis, 2.0 * half)
        if choice is None:
            choice = (axis, lanes)
        if _clean(region, axis, lanes):
            choice = (axis, lanes)
            break
    axis, lanes = choice
    other = 1 - axis

    def build(reverse_order: bool, flip_first: bool) -> list[EnuPosition]:
        ordered = lanes[::-1] if reverse_order else lanes
        pts = []
        for k, (u, (v0, v1)) in enumerate(ordered):
            ends = (v0, v1) if (k % 2 == 0) != flip_first else (v1, v0)
            for v in ends:
                xy = [0.0, 0.0]
                xy[axis] = v
                xy[other] = u
                pts.append(EnuPosition(xy[0], xy[1], scan_altitude))
        return pts

    candidates = [build(r, f) for r in (False, True) for f in (False, True)]
    if start is not None:
        candidates.sort(key=lambda c: math.hypot(c[0].x - start[0], c[0].y - start[1]))
    return ScanPath(tuple(candidates[0]), lane_spacing, scan_altitude, len(lanes))


class PathCursor(NamedTuple):
    """Position on a path: segment ``index`` and parameter ``t`` in [0, 1]."""

    index: int
    t: float


def cursor_point(path: ScanPath, cursor: PathCursor) -> EnuPosition:
    w = path.waypoints
    if len(w) == 1 or cursor.index >= len(w) - 1:
        return w[-1]
    a, b = w[cursor.index], w[cursor.index + 1]
    t = cursor.t
    return EnuPosition(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z))


def resume_point(
    path: ScanPath,
    last_object_location: Sequence[float],
    after: PathCursor | None = None,
    horizon: float | None = None,
) -> PathCursor:
    """Cursor at the path point nearest ``last_object_location``.

    Only the part of the path at or after ``after`` is considered, so scanning
    never rewinds past where it already was. ``horizon`` further limits the
    search to that many meters of path beyond ``after``; without it a detour
    toward the next lane would skip the unscanned rest of the current one.
    """
    w = path.waypoints
    if len(w) < 2:
        return PathCursor(0, 0.0)
    floor = after or PathCursor(0, 0.0)
    p = (last_object_location[0], last_object_location[1])
    remaining = math.inf if horizon is None else horizon
    best: tuple[float, PathCursor] | None = None
    for i in range(floor.index, len(w) - 1):
        a, b = w[i].xy(), w[i + 1].xy()
        seg = math.hypot(b[0] - a[0], b[1] - a[1])
        t_lo = floor.t if i == floor.index else 0.0
        t_hi = 1.0 if seg == 0.0 else min(1.0, t_lo + remaining / seg)
        _, t = distance_point_segment(p, a, b)
        t = min(max(t, t_lo), t_hi)
        d = cursor_point(path, PathCursor(i, t)).horizontal_distance(p)
        if best is None or d < best[0] - 1e-12:
            best = (d, PathCursor(i, t))
        remaining -= (1.0 - t_lo) * seg
        if remaining <= 0.0:
            break
    return best[1]


# --------------------------------------------------------------------------
# Keep-out routing


def route_around(a: Sequence[float], b: Sequence[float], keepout: Rect) -> list[Point]:
    """Shortest planar route from ``a`` to ``b`` avoiding the open ``keepout``.

    Returns the intermediate corner points followed by ``b``. A route that
    starts inside the keep-out leaves it in a straight line.
    """
    a = (a[0], a[1])
    b = (b[0], b[1])
    if keepout.contains_strict(a) or keepout.contains_strict(b):
        return [b]
    if not keepout.segment_crosses_interior(a, b):
        return [b]
    nodes = [a, b] + keepout.inflate(1e-6).corners()
    n = len(nodes)

    def visible(i: int, j: int) -> bool:
        return not keepout.segment_crosses_interior(nodes[i], nodes[j])

    dist = [math.inf] * n
    prev = [-1] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        if i == 1:
            break
        for j in range(n):
            if j != i and visible(i, j):
                nd = d + math.hypot(nodes[j][0] - nodes[i][0], nodes[j][1] - nodes[i][1])
                if nd < dist[j] - 1e-12:
                    dist[j] = nd
                    prev[j] = i
                    heapq.heappush(heap, (nd, j))
    route = []
    k = 1
    while k != 0:
        route.append(nodes[k])
        k = prev[k]
    return route[::-1]


def detour_path(path: ScanPath, keepout: Rect) -> ScanPath:
    """Walk around ``keepout`` wherever a segment of ``path`` crosses it.

    The segment is kept up to where it meets the keep-out, follows the
    boundary around to where it leaves, then carries on, so the ground on
    either side of the keep-out is still covered.
    """
    w = path.waypoints
    if not w:
        return path
    z = path.scan_altitude
    out = [w[0]]
    for nxt in w[1:]:
        a, b = out[-1].xy(), nxt.xy()
        iv = keepout.clip_segment(a, b) if keepout.segment_crosses_interior(a, b) else None
        if iv is not None:
            t0, t1 = iv
            dx, dy = b[0] - a[0], b[1] - a[1]
            entry = (a[0] + t0 * dx, a[1] + t0 * dy)
            exit_ = (a[0] + t1 * dx, a[1] + t1 * dy)
            if t0 > 0.0:
                out.append(EnuPosition(entry[0], entry[1], z))
            for x, y in route_around(entry, exit_, keepout):
                out.append(EnuPosition(x, y, z))
            if t1 >= 1.0:
                continue
        out.append(nxt)
    return ScanPath(tuple(out), path.lane_spacing, path.scan_altitude, path.lanes)


# --------------------------------------------------------------------------
# Field map


@dataclass(frozen=True)
class FieldMap:
    search_area: Polygon
    drop_zone: Polygon
    origin: GeoPoint
    partitions: tuple[Polygon, ...]
    waiting_spots: tuple[EnuPosition, ...]
    drop_spot: EnuPosition
    home_spots: tuple[EnuPosition, ...]

    @property
    def n_uavs(self) -> int:
        return len(self.partitions)

    @property
    def drop_rect(self) -> Rect:
        return Rect.from_polygon(self.drop_zone)


def _perimeter_candidates(zone: Rect, offset: float, n: int) -> list[Point]:
    cx, cy = (zone.x0 + zone.x1) / 2.0, (zone.y0 + zone.y1) / 2.0
    cands = [
        (cx, zone.y0 - offset),  # south
        (zone.x1 + offset, cy),  # east
        (cx, zone.y1 + offset),  # north
        (zone.x0 - offset, cy),  # west
    ]
    if n > 4:
        d = offset / math.sqrt(2.0)
        cands += [
            (zone.x0 - d, zone.y0 - d),
            (zone.x1 + d, zone.y0 - d),
            (zone.x1 + d, zone.y1 + d),
            (zone.x0 - d, zone.y1 + d),
        ]
    if n > len(cands):
        raise PlannerError(f"cannot place {n} waiting spots around the drop zone")
    return cands


def default_waiting_spots(
    partitions: Sequence[Polygon], drop_zone: Polygon, offset: float, altitude: float
) -> list[EnuPosition]:
    """Drop-zone edge midpoints pushed ``offset`` meters outward.

    Spots are assigned to minimize the total partition-centroid distance,
    each UAV getting a different edge.
    """
    zone = Rect.from_polygon(drop_zone)
    cands = _perimeter_candidates(zone, offset, len(partitions))
    cents = [p.centroid for p in partitions]
    best = None
    for perm in itertools.permutations(range(len(cands)), len(partitions)):
        cost = sum(math.hypot(cands[j][0] - c[0], cands[j][1] - c[1]) for j, c in zip(perm, cents))
        if best is None or cost < best[0] - 1e-9:
            best = (cost, perm)
    return [EnuPosition(cands[j][0], cands[j][1], altitude) for j in best[1]]


def default_home_spots(partitions: Sequence[Polygon]) -> list[EnuPosition]:
    """Midpoint of each partition's lowest edge, on the ground."""
    homes = []
    for part in partitions:
        ymin = part.bounds[1]
        xs = [v[0] for v in part.vertices if abs(v[1] - ymin) < 1e-9]
        homes.append(EnuPosition((min(xs) + max(xs)) / 2.0, ymin, 0.0))
    return homes


def build_field_map(
    search_area: Polygon,
    drop_zone: Polygon,
    origin: GeoPoint,
    n_uavs: int,
    mode: str = "strips",
    partitions: Sequence[Polygon] | None = None,
    waiting_spots: Sequence[EnuPosition] | None = None,
    home_spots: Sequence[EnuPosition] | None = None,
    waiting_offset: float = 6.0,
    waiting_altitude: float = 5.0,
) -> FieldMap:
    if partitions is None:
        partitions = partition_field(search_area, n_uavs, mode)
    if waiting_spots is None:
        waiting_spots = default_waiting_spots(partitions, drop_zone, waiting_offset, waiting_altitude)
    if home_spots is None:
        home_spots = default_home_spots(partitions)
    cx, cy = drop_zone.centroid
    fm = FieldMap(
        search_area,
        drop_zone,
        origin,
        tuple(partitions),
        tuple(waiting_spots),
        EnuPosition(cx, cy, waiting_altitude),
        tuple(home_spots),
    )
    validate_field_map(fm)
    return fm


def validate_field_map(fm: FieldMap, area_tol: float = 0.01) -> None:
    """Raise :class:`PlannerError` unless the map satisfies its invariants."""
    n = len(fm.partitions)
    if n == 0:
        raise PlannerError("at least one partition is required")
    if len(fm.waiting_spots) != n or len(fm.home_spots) != n:
        raise PlannerError("need one waiting spot and one home spot per partition")
    sx0, sy0, sx1, sy1 = fm.search_area.bounds
    dx0, dy0, dx1, dy1 = fm.drop_zone.bounds
    if not (sx0 < dx0 and dx1 < sx1 and sy0 < dy0 and dy1 < sy1):
        raise PlannerError("drop zone must lie strictly inside the search area")
    areas = [p.area for p in fm.partitions]
    if max(areas) > min(areas) * (1.0 + area_tol):
        raise PlannerError(f"partition areas differ by more than {area_tol:.0%}: {areas}")
    _check_tiling(fm.search_area, fm.partitions)
    for i, j in itertools.combinations(range(n), 2):
        a, b = fm.waiting_spots[i], fm.waiting_spots[j]
        if a.horizontal_distance(b) < 5.0:
            raise PlannerError(f"waiting spots {i + 1} and {j + 1} are closer than 5 m")
    for i, spot in enumerate(fm.waiting_spots):
        if Rect.from_polygon(fm.drop_zone).contains(spot):
            raise PlannerError(f"waiting spot {i + 1} lies inside the drop zone")


def _check_tiling(area: Polygon, parts: Sequence[Polygon]) -> None:
    import shapely.geometry as sg
    from shapely.ops import unary_union

    shapes = [sg.Polygon(p.vertices) for p in parts]
    tol = 1e-6 * area.area
    for i, j in itertools.combinations(range(len(shapes)), 2):
        if shapes[i].intersection(shapes[j]).area > tol:
            raise PlannerError(f"partitions {i + 1} and {j + 1} overlap")
    union = unary_union(shapes)
    if union.symmetric_difference(sg.Polygon(area.vertices)).area > tol:
        raise PlannerError("partitions do not tile the search area")
