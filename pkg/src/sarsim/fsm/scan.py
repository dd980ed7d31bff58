"""Following a zig-zag scan path while watching for objects."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from ..geometry import EnuPosition, Polygon, point_in_polygon
from ..localization import PixelDetection
from ..planner import PathCursor, ScanPath, cursor_point
from .events import ObjectDetected, ScanExhausted


@dataclass(frozen=True)
class ScanStep:
    setpoint: EnuPosition
    cursor: PathCursor
    event: ObjectDetected | ScanExhausted | None = None
    target: EnuPosition | None = None  # ENU estimate behind ``event``
    ignored: tuple[EnuPosition, ...] = field(default=())


def advance_cursor(
    path: ScanPath, cursor: PathCursor, position: Sequence[float], lookahead: float
) -> PathCursor:
    """Move ``cursor`` forward to the first path point ``lookahead`` meters away.

    The cursor never moves backwards and never moves while the UAV is farther
    than ``lookahead`` from it, so a UAV that strays off the path flies back
    to where it left off.
    """
    w = path.waypoints
    last = len(w) - 1
    qx, qy = position[0], position[1]
    i, t = cursor
    L2 = lookahead * lookahead
    while i < last:
        a, b = w[i], w[i + 1]
        dx, dy = b.x - a.x, b.y - a.y
        px, py = a.x + t * dx - qx, a.y + t * dy - qy
        if px * px + py * py >= L2:
            break
        # larger root of |a + s d - q| = L along this segment
        ax, ay = a.x - qx, a.y - qy
        A = dx * dx + dy * dy
        if A == 0.0:
            i, t = i + 1, 0.0
            continue
        B = dx * ax + dy * ay
        C = ax * ax + ay * ay - L2
        disc = max(0.0, B * B - A * C)
        s = (-B + math.sqrt(disc)) / A
        if s <= 1.0:
            t = max(t, s)
            break
        i, t = i + 1, 0.0
    if i >= last:
        return PathCursor(last, 0.0)
    return PathCursor(i, t)


def scan_step(
    path: ScanPath,
    cursor: PathCursor,
    position: Sequence[float],
    partition: Polygon,
    detections: Sequence[tuple[PixelDetection, EnuPosition]] = (),
    lookahead: float = 3.0,
    tolerance: float = 0.5,
) -> ScanStep:
    """One scanning tick.

    ``detections`` pairs each pixel detection with its ENU estimate. The first
    one inside our own partition (boundary included) raises ``ObjectDetected``;
    the rest are returned as ignored. ``ScanExhausted`` fires once the cursor
    sits on the final waypoint and the UAV has reached it.
    """
    ignored = []
    for det, est in detections:
        if point_in_polygon(est, partition):
            sp = cursor_point(path, cursor)
            return ScanStep(sp, cursor, ObjectDetected(det), est, tuple(ignored))
        ignored.append(est)
    cursor = advance_cursor(path, cursor, position, lookahead)
    sp = cursor_point(path, cursor)
    event = None
    if cursor.index >= len(path.waypoints) - 1:
        if math.hypot(sp.x - position[0], sp.y - position[1]) <= tolerance:
            event = ScanExhausted()
    return ScanStep(sp, cursor, event, None, tuple(ignored))
