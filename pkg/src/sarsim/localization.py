"""Empirical pixel-to-ground camera model.

A quadratic through the origin maps radial pixel displacement to ground
displacement at a fixed calibration altitude ``h_c``; other altitudes scale
linearly. The polynomial is applied to ``|p|`` and the sign restored so that
objects left of center produce leftward offsets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import BodyOffset, EnuPosition, body_to_enu

DEFAULT_A = 0.0018037
DEFAULT_B = 0.3124266

_UNIT_TO_METERS = {"m": 1.0, "cm": 0.01, "mm": 0.001}


class LocalizationError(ValueError):
    pass


class InvalidAltitudeError(LocalizationError):
    pass


class CalibrationFitError(LocalizationError):
    pass


@dataclass(frozen=True)
class CalibrationModel:
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    h_c: float = 5.0
    units: str = "cm"
    rms_residual: float | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.h_c > 0:
            raise LocalizationError(f"calibration altitude must be positive, got {self.h_c}")
        if self.units not in _UNIT_TO_METERS:
            raise LocalizationError(f"unknown calibration units {self.units!r}")

    @property
    def meters_per_unit(self) -> float:
        return _UNIT_TO_METERS[self.units]

    def forward(self, p: float) -> float:
        """Signed ground displacement (table units) for a signed pixel value."""
        m = abs(p)
        d = self.a * m * m + self.b * m
        return d if p >= 0 else -d

    def inverse(self, d: float) -> float:
        """Signed pixel value producing ground displacement ``d`` (table units).

        Closed-form positive root of ``a p^2 + b p = |d|``; requires the
        polynomial to be increasing on ``p >= 0``.
        """
        m = abs(d)
        if self.a == 0.0:
            p = m / self.b
        else:
            # 2c / (b + sqrt(b^2 + 4ac)) avoids cancellation for small |d|
            p = 2.0 * m / (self.b + math.sqrt(self.b * self.b + 4.0 * self.a * m))
        return p if d >= 0 else -p

    def to_config(self) -> dict:
        return {"a": self.a, "b": self.b, "h_c": self.h_c, "units": self.units}


@dataclass(frozen=True)
class PixelDetection:
    """Object center in pixels relative to the image center (x right, y up)."""

    x_pixels: float
    y_pixels: float
    frame_id: int = 0

    def within(self, half_width: float, half_height: float) -> bool:
        return abs(self.x_pixels) <= half_width and abs(self.y_pixels) <= half_height


def pixel_to_body_at_calibration(det: PixelDetection, model: CalibrationModel) -> BodyOffset:
    return BodyOffset(model.forward(det.x_pixels), model.forward(det.y_pixels))


def scale_to_altitude(d_hc: BodyOffset, h_actual: float, model: CalibrationModel) -> BodyOffset:
    if not h_actual > 0:
        raise InvalidAltitudeError(f"altitude must be positive, got {h_actual}")
    k = h_actual / model.h_c
    return BodyOffset(k * d_hc.r_x, k * d_hc.r_y)


def detection_to_setpoint(
    det: PixelDetection,
    position: EnuPosition,
    heading: float,
    h_agl: float,
    model: CalibrationModel,
) -> EnuPosition:
    """Pixel detection -> ENU set-point over the object, at the current z."""
    d = scale_to_altitude(pixel_to_body_at_calibration(det, model), h_agl, model)
    k = model.meters_per_unit
    return body_to_enu(position, BodyOffset(k * d.r_x, k * d.r_y), heading)


def ground_half_extent(pixels: float, h_agl: float, model: CalibrationModel) -> float:
    """Ground half-width (meters) seen by ``pixels`` of displacement at ``h_agl``."""
    return model.forward(pixels) * h_agl / model.h_c * model.meters_per_unit


def fit_calibration(
    samples: Iterable[Sequence[float]], h_c: float = 5.0, units: str = "cm"
) -> CalibrationModel:
    """Least-squares fit of ``d = a p^2 + b p`` (no intercept).

    ``samples`` are ``(pixels, measured)`` pairs with non-negative pixel
    displacement. The residual RMS is stored on the returned model.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3 or arr.shape[1] != 2:
        raise CalibrationFitError("need at least 3 (pixels, meters) samples")
    p, d = arr[:, 0], arr[:, 1]
    if np.any(p < 0):
        raise CalibrationFitError("pixel displacements must be non-negative")
    if len(np.unique(p)) < 3:
        raise CalibrationFitError("need at least 3 distinct pixel displacements")
    design = np.column_stack([p * p, p])
    coef, _, rank, _ = np.linalg.lstsq(design, d, rcond=None)
    if rank < 2:
        raise CalibrationFitError("calibration system is rank deficient")
    residual = design @ coef - d
    rms = float(np.sqrt(np.mean(residual**2)))
    return CalibrationModel(float(coef[0]), float(coef[1]), h_c, units, rms_residual=rms)


def load_samples_csv(path: str | Path) -> list[tuple[float, float]]:
    """Read a ``pixels,meters`` CSV."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["pixels", "meters"]:
            raise CalibrationFitError(f"{path}: expected header 'pixels,meters'")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["pixels"]), float(row["meters"])))
            except (TypeError, ValueError) as exc:
                raise CalibrationFitError(f"{path}:{lineno}: bad sample row {row}") from exc
    return rows
