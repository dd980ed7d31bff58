"""Synthetic GPS, LiDAR altitude and camera detections."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from ..localization import CalibrationModel, PixelDetection


@dataclass(frozen=True)
class SensorConfig:
    gps_noise_sigma: float = 0.3
    gps_noise_tau: float = 10.0  # correlation time of the GPS error, s
    lidar_noise_sigma: float = 0.02
    detection_fov_deg: float = 170.0
    per_frame_detection_prob: float = 0.9
    pixel_noise_sigma: float = 1.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if not 0.0 <= self.per_frame_detection_prob <= 1.0:
            raise ValueError("per_frame_detection_prob must lie in [0, 1]")
        for name in ("gps_noise_sigma", "lidar_noise_sigma", "pixel_noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.detection_fov_deg < 180:
            raise ValueError("detection_fov_deg must lie in (0, 180)")
        if self.gps_noise_tau <= 0:
            raise ValueError("gps_noise_tau must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image size must be positive")

    @classmethod
    def noise_free(cls, **kw) -> "SensorConfig":
        base = dict(gps_noise_sigma=0.0, lidar_noise_sigma=0.0, pixel_noise_sigma=0.0, per_frame_detection_prob=1.0)
        base.update(kw)
        return cls(**base)


class GaussMarkovGps:
    """Horizontal position error as a first-order Gauss-Markov process."""

    def __init__(self, sigma: float, tau: float, rng: random.Random):
        self.sigma = sigma
        self.tau = tau
        self.rng = rng
        self.ex = rng.gauss(0.0, sigma) if sigma > 0 else 0.0
        self.ey = rng.gauss(0.0, sigma) if sigma > 0 else 0.0
        self._dt = None
        self._phi = 1.0
        self._q = 0.0

    def step(self, dt: float) -> tuple[float, float]:
        if self.sigma > 0:
            if dt != self._dt:
                self._dt = dt
                self._phi = math.exp(-dt / self.tau)
                self._q = self.sigma * math.sqrt(1.0 - self._phi * self._phi)
            g = self.rng.gauss
            self.ex = self._phi * self.ex + self._q * g(0.0, 1.0)
            self.ey = self._phi * self.ey + self._q * g(0.0, 1.0)
        return self.ex, self.ey


def lidar_altitude(z: float, sigma: float, rng: random.Random) -> float:
    if sigma > 0:
        return max(0.0, z + rng.gauss(0.0, sigma))
    return z


def body_offset_of(dx: float, dy: float, heading: float) -> tuple[float, float]:
    """ENU offset -> body (r_x, r_y); inverse of the body-to-ENU rotation."""
    c, s = math.cos(heading), math.sin(heading)
    return dx * c - dy * s, dx * s + dy * c


def project_to_pixels(
    dx: float, dy: float, depth: float, heading: float, model: CalibrationModel
) -> tuple[float, float]:
    """Noise-free pixel coordinates of a ground offset seen from ``depth`` above it."""
    r_x, r_y = body_offset_of(dx, dy, heading)
    k = model.h_c / (depth * model.meters_per_unit)
    return model.inverse(r_x * k), model.inverse(r_y * k)


def synthesize_detection(
    uav: Sequence[float],
    heading: float,
    objects: Sequence[Sequence[float]],
    cfg: SensorConfig,
    model: CalibrationModel,
    rng: random.Random,
) -> PixelDetection | None:
    """Camera frame for a UAV at ``uav`` looking straight down.

    ``objects`` are the visible object tops ``(x, y, z_top)``. The object
    closest to the image center among those inside both the lens field of
    view and the image frame is projected through the inverse calibration,
    using the height above the object top. One visibility draw is made per
    frame, then Gaussian pixel noise is added.
    """
    ux, uy, uz = uav[0], uav[1], uav[2]
    if uz <= 0:
        return None
    visible = rng.random() < cfg.per_frame_detection_prob
    if not visible:
        return None
    # frame edges as ground offsets per meter of depth; the calibration is
    # monotone, so only objects inside the frame need the inverse
    m = model.meters_per_unit / model.h_c
    lim_x = model.forward(cfg.image_width / 2.0) * m
    lim_y = model.forward(cfg.image_height / 2.0) * m
    tan2 = math.tan(math.radians(cfg.detection_fov_deg) / 2.0) ** 2
    c, s = math.cos(heading), math.sin(heading)
    best = None
    for obj in objects:
        depth = uz - obj[2]
        if depth <= 0:
            continue
        dx, dy = obj[0] - ux, obj[1] - uy
        if dx * dx + dy * dy > depth * depth * tan2:
            continue
        r_x, r_y = dx * c - dy * s, dx * s + dy * c
        if abs(r_x) > lim_x * depth or abs(r_y) > lim_y * depth:
            continue
        k = 1.0 / (depth * m)
        px, py = model.inverse(r_x * k), model.inverse(r_y * k)
        r2 = px * px + py * py
        if best is None or r2 < best[0]:
            best = (r2, px, py)
    if best is None:
        return None
    _, px, py = best
    if cfg.pixel_noise_sigma > 0:
        px += rng.gauss(0.0, cfg.pixel_noise_sigma)
        py += rng.gauss(0.0, cfg.pixel_noise_sigma)
    return PixelDetection(px, py)


def footprint_half_extents(
    altitude: float, cfg: SensorConfig, model: CalibrationModel
) -> tuple[float, float]:
    """Ground half-width and half-height (meters) of the image at ``altitude``."""
    k = altitude / model.h_c * model.meters_per_unit
    cap = altitude * math.tan(math.radians(cfg.detection_fov_deg) / 2.0)
    return (
        min(cap, model.forward(cfg.image_width / 2.0) * k),
        min(cap, model.forward(cfg.image_height / 2.0) * k),
    )


def default_lane_spacing(altitude: float, cfg: SensorConfig, model: CalibrationModel, overlap: float = 0.8) -> float:
    """``overlap`` times the narrower image footprint at ``altitude``."""
    return overlap * 2.0 * min(footprint_half_extents(altitude, cfg, model))
