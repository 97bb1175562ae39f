"""Print-error simulators: ink wedges (line print/skip) and blots.

A wedge is a bundle of near-parallel lines: Gaussian-jittered origins around
a primary seed point, Gaussian slope angles, Gaussian lengths. Painting ink
(255) gives a line print error, erasing (0) gives a line skip error; the
vertical-solid skip variant pins the mean angle at pi/2 with a much tighter
spread. Blots are rays at a fixed angular step whose lengths are normally
distributed around a spot radius.

Every simulator draws from a caller-owned Rng in a documented order, so a
(seed, stream) pair regenerates any corrupted sample byte for byte. The
proportionality constants are deliberate choices (the source observations
only fix the structure, not the numbers) and sit in ErrorConfig for tuning.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict

from .core import GrayImage, Point, Rng, draw_line


class ErrorKind(enum.Enum):
    LPE = "LPE"
    LSE = "LSE"
    LSE_VERTICAL_SOLID = "LSE_VERTICAL_SOLID"
    BLOT = "BLOT"

    @property
    def is_wedge(self) -> bool:
        return self is not ErrorKind.BLOT


@dataclass(frozen=True)
class ErrorConfig:
    girth_lo: float = 2.0
    girth_hi: float = 8.0
    line_count_factor: float = 1.5
    angle_std: float = 0.05
    angle_std_vertical: float = 0.01
    len_mean_factor: float = 0.35       # of the image diagonal
    len_std_factor: float = 0.1
    blot_radius_lo: float = 3.0
    blot_radius_hi: float = 7.0
    blot_splash_lo: float = 0.5
    blot_splash_hi: float = 2.5
    blot_rays: int = 720
    visibility_min_pixels: int = 25
    max_attempts: int = 50


DEFAULT_ERRORS = ErrorConfig()


class UnviableSampleError(RuntimeError):
    """Raised when no visible corruption could be produced for an input."""


@dataclass
class WedgeParams:
    ink: int
    primary_seed: Point
    girth: float
    n_lines: int
    angle_mean: float
    angle_std: float
    len_mean: float
    len_std: float

    def to_record(self) -> dict:
        d = asdict(self)
        d["primary_seed"] = [self.primary_seed.row, self.primary_seed.col]
        return d

    @classmethod
    def from_record(cls, d: dict) -> "WedgeParams":
        d = dict(d)
        d["primary_seed"] = Point(*d["primary_seed"])
        return cls(**d)


@dataclass
class BlotParams:
    center: Point
    radius_mean: float
    splash_std: float
    d_theta: float

    def to_record(self) -> dict:
        d = asdict(self)
        d["center"] = [self.center.row, self.center.col]
        return d

    @classmethod
    def from_record(cls, d: dict) -> "BlotParams":
        d = dict(d)
        d["center"] = Point(*d["center"])
        return cls(**d)


def sample_wedge_params(rng: Rng, kind: ErrorKind, height: int, width: int,
                        cfg: ErrorConfig = DEFAULT_ERRORS) -> WedgeParams:
    """Draw wedge parameters; order: seed row, seed col, girth, [angle mean].

    The primary seed is uniform over the centred inner 80% of the image;
    line count is proportional to the expected girth.
    """
    if not kind.is_wedge:
        raise ValueError(f"{kind} is not a wedge error; use sample_blot_params")
    row = int(rng.uniform(0.1 * height, 0.9 * height))
    col = int(rng.uniform(0.1 * width, 0.9 * width))
    girth = rng.uniform(cfg.girth_lo, cfg.girth_hi)
    if kind is ErrorKind.LSE_VERTICAL_SOLID:
        angle_mean = math.pi / 2
        angle_std = cfg.angle_std_vertical
    else:
        angle_mean = rng.uniform(0.0, math.pi)
        angle_std = cfg.angle_std
    diag = math.hypot(height, width)
    return WedgeParams(
        ink=255 if kind is ErrorKind.LPE else 0,
        primary_seed=Point(row, col),
        girth=girth,
        n_lines=max(1, math.floor(cfg.line_count_factor * girth + 0.5)),
        angle_mean=angle_mean,
        angle_std=angle_std,
        len_mean=cfg.len_mean_factor * diag,
        len_std=cfg.len_std_factor * diag,
    )


def apply_wedge(img: GrayImage, p: WedgeParams, rng: Rng) -> GrayImage:
    """Draw the wedge's line bundle onto `img` in place.

    Per line, the draw order is fixed: row offset, column offset, angle,
    length. Secondary seeds are the primary seed plus Gaussian offsets with
    std girth/2, rounded and clamped into the image.
    """
    for _ in range(p.n_lines):
        d_row = rng.normal(0.0, p.girth / 2)
        d_col = rng.normal(0.0, p.girth / 2)
        angle = rng.normal(p.angle_mean, p.angle_std)
        length = abs(rng.normal(p.len_mean, p.len_std))
        origin = Point(
            min(max(math.floor(p.primary_seed.row + d_row + 0.5), 0), img.height - 1),
            min(max(math.floor(p.primary_seed.col + d_col + 0.5), 0), img.width - 1),
        )
        draw_line(img, origin, angle, length, p.ink)
    return img


def sample_blot_params(rng: Rng, height: int, width: int,
                       cfg: ErrorConfig = DEFAULT_ERRORS) -> BlotParams:
    """Draw blot parameters; order: centre row, centre col, radius, splash."""
    if height <= 0 or width <= 0:
        raise ValueError(f"image must be non-empty, got {height}x{width}")
    row = int(rng.uniform(0.0, height))
    col = int(rng.uniform(0.0, width))
    radius_mean = rng.uniform(cfg.blot_radius_lo, cfg.blot_radius_hi)
    splash_std = rng.uniform(cfg.blot_splash_lo, cfg.blot_splash_hi)
    return BlotParams(Point(row, col), radius_mean, splash_std,
                      2 * math.pi / cfg.blot_rays)


def apply_blot(img: GrayImage, p: BlotParams, rng: Rng) -> GrayImage:
    """Draw ink rays from the centre for every angle in [0, 2pi) step d_theta."""
    n_rays = math.ceil(2 * math.pi / p.d_theta - 1e-12)
    for i in range(n_rays):
        length = abs(rng.normal(p.radius_mean, p.splash_std))
        draw_line(img, p.center, i * p.d_theta, length, 255)
    return img


def corrupt(img: GrayImage, kind: ErrorKind, rng: Rng,
            cfg: ErrorConfig = DEFAULT_ERRORS) -> tuple[GrayImage, dict]:
    """Apply `kind` to a copy of a binary segment, enforcing visibility.

    The output must differ from the input in at least
    cfg.visibility_min_pixels pixels (for skip errors that means erased
    foreground); parameters are resampled from the same stream until it
    does, up to cfg.max_attempts times. Returns the corrupted image and a
    record (params plus the Rng state at application time) sufficient to
    regenerate the output exactly.
    """
    for attempt in range(1, cfg.max_attempts + 1):
        if kind is ErrorKind.BLOT:
            params = sample_blot_params(rng, img.height, img.width, cfg)
        else:
            params = sample_wedge_params(rng, kind, img.height, img.width, cfg)
        state_before = (rng.state, rng.inc)
        out = img.copy()
        if kind is ErrorKind.BLOT:
            apply_blot(out, params, rng)
        else:
            apply_wedge(out, params, rng)
        changed = int((out.pixels != img.pixels).sum())
        if changed >= cfg.visibility_min_pixels:
            record = {
                "kind": kind.value,
                "attempt": attempt,
                "rng_state": state_before[0],
                "rng_inc": state_before[1],
                "params": params.to_record(),
            }
            return out, record
    raise UnviableSampleError(
        f"no visible {kind.value} after {cfg.max_attempts} attempts "
        f"(input has {img.ink_count()} ink pixels)")


def regenerate(img: GrayImage, record: dict) -> GrayImage:
    """Re-apply a corruption from its record; byte-identical to the original."""
    kind = ErrorKind(record["kind"])
    rng = Rng.__new__(Rng)
    rng.state = record["rng_state"]
    rng.inc = record["rng_inc"]
    out = img.copy()
    if kind is ErrorKind.BLOT:
        apply_blot(out, BlotParams.from_record(record["params"]), rng)
    else:
        apply_wedge(out, WedgeParams.from_record(record["params"]), rng)
    return out
