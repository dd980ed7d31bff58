"""Colored-disk detector.

Each frame is thresholded independently in RGB, HLS and LAB. The three binary
masks are merged into one gray image with fixed per-space weights, binarized,
and split into 8-connected blobs. Colorspace conversions are 8-bit with
round-half-up so results are identical across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .localization import PixelDetection
from .ppm import read_ppm, write_ppm

WEIGHT_HLS = 0.2989
WEIGHT_LAB = 0.5870
WEIGHT_RGB = 0.1140

DEFAULT_BINARIZE_THRESHOLD = 140
DEFAULT_MIN_AREA = 25

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

# sRGB (D65) -> XYZ
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# white point as the matrix row sums, so sRGB white lands exactly on a = b = 0
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_LAB_EPS = (6.0 / 29.0) ** 3


class VisionError(ValueError):
    pass


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def _to_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(_round_half_up(x), 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class RgbImage:
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)  # (height, width, 3) uint8, row-major

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise VisionError("image dimensions must be positive")
        if self.pixels.shape != (self.height, self.width, 3) or self.pixels.dtype != np.uint8:
            raise VisionError(
                f"pixel buffer must be uint8 of shape {(self.height, self.width, 3)}, "
                f"got {self.pixels.dtype} {self.pixels.shape}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "RgbImage":
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        return cls(arr.shape[1], arr.shape[0], arr)

    @classmethod
    def from_bytes(cls, width: int, height: int, buf: bytes) -> "RgbImage":
        if len(buf) != 3 * width * height:
            raise VisionError(f"buffer length {len(buf)} != 3*{width}*{height}")
        arr = np.frombuffer(buf, dtype=np.uint8).reshape(height, width, 3).copy()
        return cls(width, height, arr)

    @classmethod
    def read(cls, path) -> "RgbImage":
        return cls.from_array(read_ppm(path))

    def write(self, path) -> None:
        write_ppm(path, self.pixels)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    @property
    def center(self) -> tuple[float, float]:
        return (self.width / 2.0, self.height / 2.0)


# --------------------------------------------------------------------------
# Colorspaces


def rgb_to_hls_array(rgb: np.ndarray) -> np.ndarray:
    """Hexcone HLS of an (..., 3) uint8 array, each channel on [0, 255]."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    maxc = c.max(axis=-1)
    minc = c.min(axis=-1)
    sumc = maxc + minc
    rangec = maxc - minc
    light = sumc / 2.0
    chroma = rangec > 0
    safe_range = np.where(chroma, rangec, 1.0)
    sat = np.where(
        light <= 0.5,
        rangec / np.where(chroma, sumc, 1.0),
        rangec / np.where(chroma, 2.0 - sumc, 1.0),
    )
    sat = np.where(chroma, sat, 0.0)
    rc = (maxc - r) / safe_range
    gc = (maxc - g) / safe_range
    bc = (maxc - b) / safe_range
    hue = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    hue = np.where(chroma, (hue / 6.0) % 1.0, 0.0)
    return np.stack([_to_u8(hue * 255.0), _to_u8(light * 255.0), _to_u8(sat * 255.0)], axis=-1)


def rgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    """CIELAB (D65) of an (..., 3) uint8 array: L*2.55, a+128, b+128."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = lin @ _RGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _LAB_EPS, np.cbrt(xyz), xyz / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lum = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return np.stack([_to_u8(lum * 255.0 / 100.0), _to_u8(a + 128.0), _to_u8(b + 128.0)], axis=-1)


def rgb_to_hls(pixel: Sequence[int]) -> tuple[int, int, int]:
    return tuple(int(v) for v in rgb_to_hls_array(np.array([pixel], dtype=np.uint8))[0])


def rgb_to_lab(pixel: Sequence[int]) -> tuple[int, int, int]:
    return tuple(int(v) for v in rgb_to_lab_array(np.array([pixel], dtype=np.uint8))[0])


# --------------------------------------------------------------------------
# Thresholds

Bounds = tuple[tuple[int, int, int], tuple[int, int, int]]


def _check_bounds(name: str, bounds: Bounds) -> Bounds:
    lo, hi = (tuple(int(v) for v in b) for b in bounds)
    if len(lo) != 3 or len(hi) != 3:
        raise VisionError(f"{name} bounds must be triples")
    if any(not 0 <= v <= 255 for v in lo + hi):
        raise VisionError(f"{name} bounds must be 8-bit")
    if any(l > h for l, h in zip(lo, hi)):
        raise VisionError(f"{name} lower bound exceeds upper bound: {lo} > {hi}")
    return (lo, hi)


@dataclass(frozen=True)
class ColorThresholds:
    color_name: str
    rgb: Bounds
    hls: Bounds
    lab: Bounds

    def __post_init__(self):
        for space in ("rgb", "hls", "lab"):
            object.__setattr__(self, space, _check_bounds(space, getattr(self, space)))

    def to_config(self) -> dict:
        return {s: [list(b) for b in getattr(self, s)] for s in ("rgb", "hls", "lab")}

    @classmethod
    def from_config(cls, name: str, cfg: dict) -> "ColorThresholds":
        return cls(name, tuple(cfg["rgb"]), tuple(cfg["hls"]), tuple(cfg["lab"]))


def _in_range(channels: np.ndarray, bounds: Bounds) -> np.ndarray:
    lo = np.array(bounds[0], dtype=np.uint8)
    hi = np.array(bounds[1], dtype=np.uint8)
    return np.all((channels >= lo) & (channels <= hi), axis=-1)


def threshold_masks(img: RgbImage, th: ColorThresholds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean in-range masks for (HLS, LAB, RGB)."""
    px = img.pixels
    return (
        _in_range(rgb_to_hls_array(px), th.hls),
        _in_range(rgb_to_lab_array(px), th.lab),
        _in_range(px, th.rgb),
    )


def merge_masks(hls: np.ndarray, lab: np.ndarray, rgb: np.ndarray) -> np.ndarray:
    gray = (
        WEIGHT_HLS * 255.0 * hls.astype(np.float64)
        + WEIGHT_LAB * 255.0 * lab.astype(np.float64)
        + WEIGHT_RGB * 255.0 * rgb.astype(np.float64)
    )
    return _to_u8(gray)


def threshold_merge(img: RgbImage, th: ColorThresholds) -> np.ndarray:
    """Weighted merge of the three binary masks into an 8-bit gray image."""
    return merge_masks(*threshold_masks(img, th))


def merge_alphabet() -> list[int]:
    """Every gray value :func:`threshold_merge` can emit, ascending."""
    values = set()
    for h in (0, 1):
        for l in (0, 1):
            for r in (0, 1):
                values.add(
                    int(merge_masks(np.array([h], bool), np.array([l], bool), np.array([r], bool))[0])
                )
    return sorted(values)


def auto_calibrate_thresholds(
    img: RgbImage,
    seed_region: tuple[int, int, int, int],
    tolerance: float,
    color_name: str = "target",
) -> ColorThresholds:
    """Derive per-space bounds from a seed rectangle ``(x, y, width, height)``.

    Bounds are the per-channel min/max over the region widened by
    ``tolerance * 255`` and clamped to 8 bits.
    """
    x, y, w, h = seed_region
    if w <= 0 or h <= 0 or w * h < 9:
        raise VisionError("seed region must cover at least 9 pixels")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise VisionError(f"seed region {seed_region} exceeds the {img.width}x{img.height} image")
    if tolerance < 0:
        raise VisionError("tolerance must be non-negative")
    patch = img.pixels[y : y + h, x : x + w]
    widen = tolerance * 255.0
    spaces = {}
    for name, conv in (("rgb", patch), ("hls", rgb_to_hls_array(patch)), ("lab", rgb_to_lab_array(patch))):
        flat = conv.reshape(-1, 3).astype(np.float64)
        lo = np.clip(np.floor(flat.min(axis=0) - widen), 0, 255).astype(int)
        hi = np.clip(np.ceil(flat.max(axis=0) + widen), 0, 255).astype(int)
        spaces[name] = (tuple(int(v) for v in lo), tuple(int(v) for v in hi))
    return ColorThresholds(color_name, spaces["rgb"], spaces["hls"], spaces["lab"])


# --------------------------------------------------------------------------
# Blobs


@dataclass(frozen=True)
class Blob:
    center: tuple[float, float]  # (x, y) image coordinates, subpixel
    radius: float
    area: int
    color_name: str = ""


def detect_blobs(
    gray: np.ndarray,
    binarize_threshold: int = DEFAULT_BINARIZE_THRESHOLD,
    min_area: int = DEFAULT_MIN_AREA,
    color_name: str = "",
) -> list[Blob]:
    """8-connected components of ``gray > binarize_threshold``.

    Each component becomes a circle: centroid plus equal-area radius.
    Sorted by area descending, then by (y, x).
    """
    binary = np.asarray(gray) > binarize_threshold
    labels, count = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    rows, cols = np.nonzero(labels)
    ids = labels[rows, cols]
    area = np.bincount(ids, minlength=count + 1)
    sum_x = np.bincount(ids, weights=cols, minlength=count + 1)
    sum_y = np.bincount(ids, weights=rows, minlength=count + 1)
    blobs = []
    for k in range(1, count + 1):
        n = int(area[k])
        if n < min_area:
            continue
        blobs.append(
            Blob((sum_x[k] / n, sum_y[k] / n), math.sqrt(n / math.pi), n, color_name)
        )
    blobs.sort(key=lambda b: (-b.area, b.center[1], b.center[0]))
    return blobs


def select_closest(blobs: Sequence[Blob], image_center: tuple[float, float]) -> Blob | None:
    """Blob nearest the image center; ties go to the larger area, then lower (y, x)."""
    if not blobs:
        return None
    cx, cy = image_center
    return min(
        blobs,
        key=lambda b: (
            math.hypot(b.center[0] - cx, b.center[1] - cy),
            -b.area,
            b.center[1],
            b.center[0],
        ),
    )


def blob_to_detection(blob: Blob, image_center: tuple[float, float], frame_id: int = 0) -> PixelDetection:
    """Image coordinates (y down) -> signed offsets from center (y up)."""
    return PixelDetection(blob.center[0] - image_center[0], image_center[1] - blob.center[1], frame_id)


class ColorDetector:
    """Threshold-merge-label pipeline for one target color."""

    def __init__(
        self,
        thresholds: ColorThresholds,
        binarize_threshold: int = DEFAULT_BINARIZE_THRESHOLD,
        min_area: int = DEFAULT_MIN_AREA,
    ):
        self.thresholds = thresholds
        self.binarize_threshold = binarize_threshold
        self.min_area = min_area

    def detect(self, img: RgbImage) -> list[Blob]:
        gray = threshold_merge(img, self.thresholds)
        return detect_blobs(gray, self.binarize_threshold, self.min_area, self.thresholds.color_name)

    def locate(self, img: RgbImage, frame_id: int = 0) -> PixelDetection | None:
        blob = select_closest(self.detect(img), img.center)
        return None if blob is None else blob_to_detection(blob, img.center, frame_id)


# --------------------------------------------------------------------------
# Synthetic scenes


def render_disks(
    width: int,
    height: int,
    disks: Sequence[tuple[float, float, float, Sequence[int]]],
    background: Sequence[int] = (90, 110, 80),
) -> RgbImage:
    """Raster with filled disks ``(cx, cy, radius, rgb)``; pixel centers on integers."""
    arr = np.empty((height, width, 3), dtype=np.uint8)
    arr[:] = np.array(background, dtype=np.uint8)
    yy, xx = np.mgrid[0:height, 0:width]
    for cx, cy, r, color in disks:
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
        arr[inside] = np.array(color, dtype=np.uint8)
    return RgbImage(width, height, arr)
