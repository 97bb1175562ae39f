"""PGM (P5) and PPM (P6) binary image files, maxval 255.

Writes are bit-exact: header ``P5\\n<w> <h>\\n255\\n`` followed by raw bytes,
so identical images always produce identical files.
"""

from __future__ import annotations

import numpy as np

from .core import GrayImage


class ImageFormatError(ValueError):
    pass


def write_pgm(img: GrayImage, path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.pixels.tobytes())


def _read_header_tokens(data: bytes, count: int, offset: int) -> tuple[list[bytes], int]:
    """Pull whitespace-separated header tokens, skipping '#' comment lines."""
    tokens = []
    i = offset
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise ImageFormatError("truncated header")
        tokens.append(data[start:i])
    return tokens, i + 1  # single whitespace byte terminates the header


def read_pgm(path) -> GrayImage:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a P5 PGM file")
    try:
        (w, h, maxval), body = _read_header_tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except (ValueError, ImageFormatError) as exc:
        raise ImageFormatError(f"{path}: bad PGM header ({exc})") from None
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    expected = width * height
    raw = data[body:body + expected]
    if len(raw) != expected:
        raise ImageFormatError(f"{path}: expected {expected} pixel bytes, "
                               f"got {len(raw)}")
    return GrayImage(np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy())


def read_ppm(path) -> np.ndarray:
    """P6 file as an interleaved (h, w, 3) uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise ImageFormatError(f"{path}: not a P6 PPM file")
    try:
        (w, h, maxval), body = _read_header_tokens(data, 3, 2)
        width, height, maxval = int(w), int(h), int(maxval)
    except (ValueError, ImageFormatError) as exc:
        raise ImageFormatError(f"{path}: bad PPM header ({exc})") from None
    if maxval != 255:
        raise ImageFormatError(f"{path}: unsupported maxval {maxval}")
    expected = 3 * width * height
    raw = data[body:body + expected]
    if len(raw) != expected:
        raise ImageFormatError(f"{path}: expected {expected} pixel bytes, "
                               f"got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def write_ppm(rgb: np.ndarray, path) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageFormatError(f"expected (h, w, 3) array, got {rgb.shape}")
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(rgb.tobytes())
