"""Coordinate frames and planar geometry.

The local frame is ENU (x East, y North, z Up) in meters, anchored at a
geodetic origin. The body frame has its y-axis pointing forward; a heading
``theta`` rotates it about the ENU z-axis, with ``theta = 0`` meaning body-y
points North.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Iterable, Sequence

EARTH_RADIUS_M = 6_371_000.0
_POLAR_GUARD_DEG = 0.1


class GeometryError(ValueError):
    pass


class EnuPosition(NamedTuple):
    x: float
    y: float
    z: float = 0.0

    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def horizontal_distance(self, other: Sequence[float]) -> float:
        return math.hypot(self.x - other[0], self.y - other[1])


class BodyOffset(NamedTuple):
    r_x: float  # meters right of body
    r_y: float  # meters forward of body


class GeoPoint(NamedTuple):
    lat: float
    lon: float

    def validate(self) -> "GeoPoint":
        if not (-90.0 <= self.lat <= 90.0) or not (-180.0 <= self.lon < 180.0):
            raise GeometryError(f"geo point out of range: {self}")
        return self


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


# --------------------------------------------------------------------------
# Body -> ENU


def rotate_body_offset(r: BodyOffset, theta: float) -> BodyOffset:
    """Rotate a body-frame offset by the heading ``theta``.

    Uses the published convention literally: x' = r_y sin + r_x cos,
    y' = r_y cos - r_x sin (a clockwise rotation for positive theta).
    """
    s = math.sin(theta)
    c = math.cos(theta)
    return BodyOffset(r.r_y * s + r.r_x * c, r.r_y * c - r.r_x * s)


def body_to_enu(p_enu: EnuPosition, r: BodyOffset, theta: float) -> EnuPosition:
    """Express a body-frame offset as an ENU set-point around ``p_enu``.

    The transform is planar: the returned z is ``p_enu.z``.
    """
    rx, ry = rotate_body_offset(r, theta)
    return EnuPosition(p_enu.x + rx, p_enu.y + ry, p_enu.z)


# --------------------------------------------------------------------------
# Geodetic


def _check_origin(origin: GeoPoint) -> None:
    if abs(abs(origin.lat) - 90.0) < _POLAR_GUARD_DEG:
        raise GeometryError(
            f"origin latitude {origin.lat} is within {_POLAR_GUARD_DEG} deg of a pole"
        )


def enu_to_geo(p: Sequence[float], origin: GeoPoint) -> GeoPoint:
    """Equirectangular ENU -> lat/lon about ``origin``."""
    _check_origin(origin)
    lat = origin.lat + math.degrees(p[1] / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(
        p[0] / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat)))
    )
    return GeoPoint(lat, lon)


def geo_to_enu(g: GeoPoint, origin: GeoPoint, z: float = 0.0) -> EnuPosition:
    """Inverse of :func:`enu_to_geo`."""
    _check_origin(origin)
    y = math.radians(g.lat - origin.lat) * EARTH_RADIUS_M
    x = (
        math.radians(g.lon - origin.lon)
        * EARTH_RADIUS_M
        * math.cos(math.radians(origin.lat))
    )
    return EnuPosition(x, y, z)


# --------------------------------------------------------------------------
# Polygons

Point = tuple[float, float]


def signed_area(vertices: Sequence[Point]) -> float:
    """Shoelace signed area; positive for counter-clockwise order."""
    acc = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def _orient(a: Point, b: Point, c: Point) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(p: Point, a: Point, b: Point, eps: float = 1e-9) -> bool:
    scale = max(1.0, abs(b[0] - a[0]) + abs(b[1] - a[1]))
    if abs(_orient(a, b, p)) > eps * scale:
        return False
    return (
        min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool:
    """Closed-segment intersection test (touching counts)."""
    o1 = _orient(a, b, c)
    o2 = _orient(a, b, d)
    o3 = _orient(c, d, a)
    o4 = _orient(c, d, b)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and (
        (o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)
    ):
        return True
    return (
        _on_segment(c, a, b)
        or _on_segment(d, a, b)
        or _on_segment(a, c, d)
        or _on_segment(b, c, d)
    )


def _is_simple(vertices: Sequence[Point]) -> bool:
    n = len(vertices)
    edges = [(vertices[i], vertices[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue  # neighbours share a vertex
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


class Polygon:
    """Simple counter-clockwise polygon in the ENU plane."""

    __slots__ = ("vertices", "_bounds", "_axis_rect")

    def __init__(self, vertices: Iterable[Sequence[float]]):
        verts = tuple((float(v[0]), float(v[1])) for v in vertices)
        if len(verts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not all(math.isfinite(c) for v in verts for c in v):
            raise GeometryError("polygon vertices must be finite")
        if signed_area(verts) <= 0.0:
            raise GeometryError("polygon must be counter-clockwise with positive area")
        if not _is_simple(verts):
            raise GeometryError("polygon is self-intersecting")
        self.vertices = verts
        xs = [v[0] for v in verts]
        ys = [v[1] for v in verts]
        self._bounds = (min(xs), min(ys), max(xs), max(ys))
        # axis-aligned rectangles get a bounds-only containment test
        x0, y0, x1, y1 = self._bounds
        corners = {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}
        self._axis_rect = len(verts) == 4 and set(verts) == corners

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "Polygon":
        return cls([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def __repr__(self) -> str:
        return f"Polygon({list(self.vertices)!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self) -> int:
        return hash(self.vertices)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self._bounds

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def centroid(self) -> Point:
        a = self.area
        cx = cy = 0.0
        n = len(self.vertices)
        for i in range(n):
            x0, y0 = self.vertices[i]
            x1, y1 = self.vertices[(i + 1) % n]
            cross = x0 * y1 - x1 * y0
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        return (cx / (6.0 * a), cy / (6.0 * a))

    def edges(self) -> list[tuple[Point, Point]]:
        n = len(self.vertices)
        return [(self.vertices[i], self.vertices[(i + 1) % n]) for i in range(n)]

    def is_axis_aligned_rectangle(self, tol: float = 1e-6) -> bool:
        if len(self.vertices) != 4:
            return False
        x0, y0, x1, y1 = self._bounds
        corners = {(x0, y0), (x1, y0), (x1, y1), (x0, y1)}
        return all(
            any(abs(v[0] - c[0]) <= tol and abs(v[1] - c[1]) <= tol for c in corners)
            for v in self.vertices
        )

    def contains(self, pt: Sequence[float]) -> bool:
        return point_in_polygon(pt, self)


def point_in_polygon(pt: Sequence[float], poly: Polygon) -> bool:
    """Even-odd containment; points on the boundary count as inside."""
    x, y = pt[0], pt[1]
    bx0, by0, bx1, by1 = poly.bounds
    if x < bx0 - 1e-9 or x > bx1 + 1e-9 or y < by0 - 1e-9 or y > by1 + 1e-9:
        return False
    if poly._axis_rect:
        return True
    verts = poly.vertices
    n = len(verts)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = verts[i]
        xj, yj = verts[j]
        if _on_segment((x, y), (xj, yj), (xi, yi)):
            return True
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def distance_point_segment(p: Point, a: Point, b: Point) -> tuple[float, float]:
    """Distance from ``p`` to segment ``ab`` and the clamped projection parameter."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1]), 0.0
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - (a[0] + t * dx), p[1] - (a[1] + t * dy)), t


# --------------------------------------------------------------------------
# Axis-aligned rectangles (drop zone keep-out)


class Rect(NamedTuple):
    x0: float
    y0: float
    x1: float
    y1: float

    @classmethod
    def from_polygon(cls, poly: Polygon) -> "Rect":
        return cls(*poly.bounds)

    def inflate(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def contains(self, pt: Sequence[float]) -> bool:
        return self.x0 <= pt[0] <= self.x1 and self.y0 <= pt[1] <= self.y1

    def contains_strict(self, pt: Sequence[float]) -> bool:
        return self.x0 < pt[0] < self.x1 and self.y0 < pt[1] < self.y1

    def corners(self) -> list[Point]:
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]

    def clip_segment(self, a: Point, b: Point, eps: float = 0.0) -> tuple[float, float] | None:
        """Liang-Barsky: parameter interval of ``a -> b`` inside the rectangle shrunk by ``eps``."""
        dx = b[0] - a[0]
        dy = b[1] - a[1]
        t0, t1 = 0.0, 1.0
        for p, q in (
            (-dx, a[0] - (self.x0 + eps)),
            (dx, (self.x1 - eps) - a[0]),
            (-dy, a[1] - (self.y0 + eps)),
            (dy, (self.y1 - eps) - a[1]),
        ):
            if p == 0.0:
                if q < 0.0:
                    return None
                continue
            t = q / p
            if p < 0.0:
                if t > t1:
                    return None
                t0 = max(t0, t)
            else:
                if t < t0:
                    return None
                t1 = min(t1, t)
        return t0, t1

    def segment_crosses_interior(self, a: Point, b: Point, eps: float = 1e-9) -> bool:
        """True if ``a -> b`` passes through the open rectangle."""
        iv = self.clip_segment(a, b, eps)
        return iv is not None and iv[1] - iv[0] > 1e-12
