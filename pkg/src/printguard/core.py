"""Shared primitives: image buffer, deterministic PRNG, and line rasterization.

Everything downstream (text rendering, error simulation, training) draws its
randomness from the PCG32 generator defined here, so that a (seed, stream)
pair pins down the entire corpus bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1
_PCG_MULT = 6364136223846793005

INK = 255
BACKGROUND = 0


def splitmix64(x: int) -> int:
    """One splitmix64 scramble step; used to derive per-sample child seeds."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_child(master_seed: int, index: int) -> tuple[int, int]:
    """Seed and stream for sample `index`: splitmix64(master ^ i), stream 2i+1."""
    return splitmix64((master_seed ^ index) & _MASK64), (2 * index + 1) & _MASK64


class Rng:
    """PCG32 (XSH-RR) generator with the reference seeding sequence.

    Seeding follows the published minimal-C implementation exactly, so
    Rng(42, 54) yields 0xa15c02b7 as its first 32-bit output. The stream
    selector is forced odd. Normal deviates use Box-Muller with no caching
    of the second variate: every normal consumes exactly two u32 draws.
    """

    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int = 54):
        self.state = 0
        self.inc = (((stream << 1) | 1) & _MASK64)
        self.next_u32()
        self.state = (self.state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    def next_u32(self) -> int:
        oldstate = self.state
        self.state = (oldstate * _PCG_MULT + self.inc) & _MASK64
        xorshifted = (((oldstate >> 18) ^ oldstate) >> 27) & _MASK32
        rot = oldstate >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _MASK32

    def next_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) via the reference rejection method."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        threshold = (1 << 32) % bound
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % bound

    def uniform(self, lo: float, hi: float) -> float:
        """Uniform real in [lo, hi); consumes one u32 draw."""
        if lo > hi:
            raise ValueError(f"invalid range: lo={lo} > hi={hi}")
        return lo + (hi - lo) * (self.next_u32() / 4294967296.0)

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Box-Muller normal; always consumes two u32 draws (no caching)."""
        if std < 0:
            raise ValueError(f"std must be non-negative, got {std}")
        u1 = self.next_u32() / 4294967296.0
        u2 = self.next_u32() / 4294967296.0
        if u1 == 0.0:
            u1 = 2.0 ** -32  # log(0) guard; hit with probability 2^-32
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + std * z

    def shuffle(self, seq: np.ndarray) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.next_below(i + 1)
            seq[i], seq[j] = seq[j], seq[i]

    def clone(self) -> "Rng":
        other = Rng.__new__(Rng)
        other.state = self.state
        other.inc = self.inc
        return other


@dataclass(frozen=True)
class Point:
    row: int
    col: int


@dataclass
class GrayImage:
    """8-bit single-channel raster; ink (foreground) is 255, background 0."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.dtype != np.uint8:
            raise ValueError(f"pixels must be a 2-d uint8 array, got "
                             f"shape {px.shape} dtype {px.dtype}")
        self.pixels = px

    @classmethod
    def blank(cls, height: int, width: int, value: int = BACKGROUND) -> "GrayImage":
        if height <= 0 or width <= 0:
            raise ValueError(f"dimensions must be positive, got {height}x{width}")
        return cls(np.full((height, width), value, dtype=np.uint8))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def copy(self) -> "GrayImage":
        return GrayImage(self.pixels.copy())

    def is_binary(self) -> bool:
        return bool(np.isin(self.pixels, (0, 255)).all())

    def contains(self, p: Point) -> bool:
        return 0 <= p.row < self.height and 0 <= p.col < self.width

    def ink_count(self) -> int:
        return int(np.count_nonzero(self.pixels))


def line_pixels(origin: Point, angle: float, length: float) -> list[tuple[int, int]]:
    """Integer pixels of a ray from `origin` at `angle` over `length` pixels.

    Direction convention: +cos(angle) along columns, -sin(angle) along rows
    (angle 0 points right, pi/2 points up). Endpoint offsets are truncated
    toward zero so the rasterized run never exceeds length+1 pixels; the
    segment itself is walked with the midpoint rule (minor coordinate is the
    nearest integer, halves rounding up).
    """
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    d_row = int(-length * math.sin(angle))
    d_col = int(length * math.cos(angle))
    n = max(abs(d_row), abs(d_col))
    if n == 0:
        return [(origin.row, origin.col)]
    pts = []
    for i in range(n + 1):
        r = origin.row + d_row * i / n
        c = origin.col + d_col * i / n
        pts.append((math.floor(r + 0.5), math.floor(c + 0.5)))
    return pts


def draw_line(img: GrayImage, origin: Point, angle: float, length: float,
              ink: int) -> GrayImage:
    """Rasterize a segment onto `img` in place, clipping at the borders."""
    if not img.contains(origin):
        raise ValueError(f"origin {origin} outside {img.height}x{img.width} image")
    if ink not in (0, 255):
        raise ValueError(f"ink must be 0 or 255, got {ink}")
    h, w = img.height, img.width
    px = img.pixels
    for r, c in line_pixels(origin, angle, length):
        if 0 <= r < h and 0 <= c < w:
            px[r, c] = ink
    return img
