"""First-order set-point tracking with speed and acceleration limits."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from ..geometry import EnuPosition


class KinematicLimitError(AssertionError):
    pass


@dataclass(frozen=True)
class KinematicLimits:
    max_speed_xy: float = 3.0
    max_speed_z: float = 1.0
    max_accel: float = 2.0
    kp: float = 1.0

    def __post_init__(self):
        for name in ("max_speed_xy", "max_speed_z", "max_accel", "kp"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class UavKinematics:
    """Point-mass UAV. Plain floats on purpose: this runs every tick."""

    __slots__ = ("x", "y", "z", "vx", "vy", "vz", "heading", "limits")

    def __init__(self, position: EnuPosition, heading: float = 0.0, limits: KinematicLimits = KinematicLimits()):
        self.x, self.y, self.z = float(position[0]), float(position[1]), float(position[2])
        self.vx = self.vy = self.vz = 0.0
        self.heading = heading
        self.limits = limits

    @property
    def position(self) -> EnuPosition:
        return EnuPosition(self.x, self.y, self.z)

    @property
    def speed_xy(self) -> float:
        return math.hypot(self.vx, self.vy)

    def track(
        self,
        tx: float,
        ty: float,
        tz: float,
        dt: float,
        speed_cap: float | None = None,
        drift: tuple[float, float] = (0.0, 0.0),
        z_floor: float = 0.0,
    ) -> None:
        """Move one tick toward the target (given relative to the true position).

        The commanded velocity is ``kp * error``, clipped to the speed limits
        and slewed by at most ``max_accel * dt``. Wind ``drift`` is added to
        the commanded velocity when integrating, so it pushes the UAV but does
        not count toward its own speed.
        """
        lim = self.limits
        vmax = lim.max_speed_xy if speed_cap is None else min(speed_cap, lim.max_speed_xy)
        kp = lim.kp
        cx, cy, cz = kp * (tx - self.x), kp * (ty - self.y), kp * (tz - self.z)
        s = math.hypot(cx, cy)
        if s > vmax:
            cx, cy = cx * vmax / s, cy * vmax / s
        if cz > lim.max_speed_z:
            cz = lim.max_speed_z
        elif cz < -lim.max_speed_z:
            cz = -lim.max_speed_z
        dv = lim.max_accel * dt
        ax, ay, az = cx - self.vx, cy - self.vy, cz - self.vz
        a = math.sqrt(ax * ax + ay * ay + az * az)
        if a > dv:
            k = dv / a
            ax, ay, az = ax * k, ay * k, az * k
        self.vx += ax
        self.vy += ay
        self.vz += az
        if math.hypot(self.vx, self.vy) > lim.max_speed_xy + 1e-9 or abs(self.vz) > lim.max_speed_z + 1e-9:
            raise KinematicLimitError("commanded velocity exceeds the speed limits")
        self.x += (self.vx + drift[0]) * dt
        self.y += (self.vy + drift[1]) * dt
        z = self.z + self.vz * dt
        if z < z_floor:
            z = z_floor
            if self.vz < 0.0:
                self.vz = 0.0
        self.z = z


@dataclass(frozen=True)
class WindModel:
    mean: tuple[float, float] = (0.0, 0.0)
    gust: float = 0.0  # random-walk bound around the mean, m/s


class WindDrift:
    """Bounded random walk around a mean wind vector."""

    def __init__(self, model: WindModel, rng: random.Random):
        self.model = model
        self.rng = rng
        self.dx = self.dy = 0.0

    def step(self, dt: float) -> tuple[float, float]:
        m = self.model
        if m.gust > 0.0:
            s = m.gust * math.sqrt(dt)
            self.dx += self.rng.gauss(0.0, s)
            self.dy += self.rng.gauss(0.0, s)
            n = math.hypot(self.dx, self.dy)
            if n > m.gust:
                self.dx, self.dy = self.dx * m.gust / n, self.dy * m.gust / n
        return m.mean[0] + self.dx, m.mean[1] + self.dy
