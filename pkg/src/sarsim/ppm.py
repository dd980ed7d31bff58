"""Binary PPM (P6) and PGM (P5) I/O, maxval 255 only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class NetpbmError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise NetpbmError("truncated header")
        tokens.append(data[start:i])
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def _decode(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    tokens, offset = _tokens(data, 4)
    if tokens[0] != magic:
        raise NetpbmError(f"expected {magic!r}, found {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise NetpbmError("non-integer header field") from exc
    if width <= 0 or height <= 0:
        raise NetpbmError("image dimensions must be positive")
    if maxval != 255:
        raise NetpbmError(f"only maxval 255 is supported, got {maxval}")
    size = width * height * channels
    raster = data[offset : offset + size]
    if len(raster) != size:
        raise NetpbmError(f"raster has {len(raster)} bytes, expected {size}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width, channels) if channels > 1 else (height, width)
    return arr.reshape(shape).copy()


def read_ppm(path: str | Path) -> np.ndarray:
    return _decode(Path(path).read_bytes(), b"P6", 3)


def read_pgm(path: str | Path) -> np.ndarray:
    return _decode(Path(path).read_bytes(), b"P5", 1)


def encode_ppm(pixels: np.ndarray) -> bytes:
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise NetpbmError("PPM needs an (H, W, 3) array")
    h, w, _ = pixels.shape
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def encode_pgm(gray: np.ndarray) -> bytes:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    if gray.ndim != 2:
        raise NetpbmError("PGM needs an (H, W) array")
    h, w = gray.shape
    return b"P5\n%d %d\n255\n" % (w, h) + gray.tobytes()


def write_ppm(path: str | Path, pixels: np.ndarray) -> None:
    Path(path).write_bytes(encode_ppm(pixels))


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(gray))
