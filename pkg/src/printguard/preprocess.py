"""Raster to network input: grayscale, binarization, segmentation, scaling.

The classifier consumes binary 45x132 single-channel segments. Sheets are cut
into word segments with projection profiles; anything not already that shape
goes through bilinear resampling plus a re-threshold so inputs stay binary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GrayImage

STANDARD_HEIGHT = 45
STANDARD_WIDTH = 132

# Projection-profile segmentation defaults (config-overridable at the CLI).
ROW_NOISE_TOLERANCE = 2   # rows with this many ink pixels or fewer count as blank
MIN_ROW_GAP = 10          # blank-row run splitting text lines
MIN_COL_GAP = 12          # blank-column run splitting words within a line
BOX_PADDING = 4


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel rectangle: rows [row0, row1), cols [col0, col1)."""

    row0: int
    col0: int
    row1: int
    col1: int

    def __post_init__(self):
        if not (self.row0 < self.row1 and self.col0 < self.col1):
            raise ValueError(f"degenerate box {self}")

    @property
    def height(self) -> int:
        return self.row1 - self.row0

    @property
    def width(self) -> int:
        return self.col1 - self.col0

    def area(self) -> int:
        return self.height * self.width

    def iou(self, other: "BoundingBox") -> float:
        ir0 = max(self.row0, other.row0)
        ic0 = max(self.col0, other.col0)
        ir1 = min(self.row1, other.row1)
        ic1 = min(self.col1, other.col1)
        if ir0 >= ir1 or ic0 >= ic1:
            return 0.0
        inter = (ir1 - ir0) * (ic1 - ic0)
        return inter / (self.area() + other.area() - inter)

    def crop(self, img: GrayImage) -> GrayImage:
        return GrayImage(img.pixels[self.row0:self.row1, self.col0:self.col1].copy())


def to_grayscale(rgb: np.ndarray) -> GrayImage:
    """Rec.601 luma of an interleaved (h, w, 3) 8-bit raster."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB array, got shape {rgb.shape}")
    luma = (0.299 * rgb[..., 0].astype(np.float64)
            + 0.587 * rgb[..., 1]
            + 0.114 * rgb[..., 2])
    return GrayImage(np.floor(luma + 0.5).astype(np.uint8))


def otsu_threshold(gray: GrayImage) -> int:
    """Threshold t maximizing between-class variance; ties resolve to lowest t.

    Classes are [0..t] and [t+1..255].
    """
    hist = np.bincount(gray.pixels.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    omega = np.cumsum(hist) / total            # mass of class [0..t]
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_total * omega - mu) ** 2 / denom, 0.0)
    return int(np.argmax(sigma_b))  # argmax returns the first (lowest) maximizer


def binarize(gray: GrayImage) -> GrayImage:
    """Otsu-threshold and normalize polarity so ink (foreground) is 255.

    Document rasters are mostly background, so the smaller class is taken as
    ink; an exact tie falls back to the darker class (scanner convention:
    dark ink on light paper). A uniform image has no ink at all.
    """
    px = gray.pixels
    if px.min() == px.max():
        return GrayImage(np.zeros_like(px))
    t = otsu_threshold(gray)
    dark = px <= t
    n_dark = int(dark.sum())
    n_light = px.size - n_dark
    if n_dark < n_light:
        ink_mask = dark
    elif n_light < n_dark:
        ink_mask = ~dark
    else:
        ink_mask = dark
    return GrayImage(np.where(ink_mask, 255, 0).astype(np.uint8))


def _blank_runs(is_blank: np.ndarray, min_len: int) -> list[tuple[int, int]]:
    """Half-open runs of consecutive True of length >= min_len."""
    runs = []
    start = None
    for i, b in enumerate(is_blank):
        if b and start is None:
            start = i
        elif not b and start is not None:
            if i - start >= min_len:
                runs.append((start, i))
            start = None
    if start is not None and len(is_blank) - start >= min_len:
        runs.append((start, len(is_blank)))
    return runs


def _spans_between(is_content: np.ndarray, separators: list[tuple[int, int]]
                   ) -> list[tuple[int, int]]:
    """Content spans between separator runs, trimmed to content rows/cols."""
    n = len(is_content)
    bounds = [0]
    for s, e in separators:
        bounds.extend((s, e))
    bounds.append(n)
    spans = []
    for i in range(0, len(bounds), 2):
        lo, hi = bounds[i], bounds[i + 1]
        if lo >= hi:
            continue
        idx = np.flatnonzero(is_content[lo:hi])
        if idx.size:
            spans.append((lo + int(idx[0]), lo + int(idx[-1]) + 1))
    return spans


def segment_sheet(sheet: GrayImage,
                  row_noise_tolerance: int = ROW_NOISE_TOLERANCE,
                  min_row_gap: int = MIN_ROW_GAP,
                  min_col_gap: int = MIN_COL_GAP,
                  padding: int = BOX_PADDING) -> list[BoundingBox]:
    """Word boxes of a binary ink=255 sheet, in reading order.

    Horizontal projection splits the sheet into text lines wherever a run of
    near-blank rows (ink count <= row_noise_tolerance) is at least
    min_row_gap long; the vertical projection of each line splits words at
    blank-column runs of at least min_col_gap. Boxes are padded and clipped.
    """
    fg = sheet.pixels != 0
    row_counts = fg.sum(axis=1)
    line_seps = _blank_runs(row_counts <= row_noise_tolerance, min_row_gap)
    boxes = []
    for r0, r1 in _spans_between(row_counts > row_noise_tolerance, line_seps):
        band = fg[r0:r1]
        col_counts = band.sum(axis=0)
        col_seps = _blank_runs(col_counts == 0, min_col_gap)
        for c0, c1 in _spans_between(col_counts > 0, col_seps):
            rows = np.flatnonzero(band[:, c0:c1].any(axis=1))
            boxes.append(BoundingBox(
                max(0, r0 + int(rows[0]) - padding),
                max(0, c0 - padding),
                min(sheet.height, r0 + int(rows[-1]) + 1 + padding),
                min(sheet.width, c1 + padding),
            ))
    return boxes


def _bilinear(px: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centre bilinear resample to (out_h, out_w), float64."""
    in_h, in_w = px.shape
    src_r = np.clip((np.arange(out_h) + 0.5) * in_h / out_h - 0.5, 0, in_h - 1)
    src_c = np.clip((np.arange(out_w) + 0.5) * in_w / out_w - 0.5, 0, in_w - 1)
    r0 = np.floor(src_r).astype(np.intp)
    c0 = np.floor(src_c).astype(np.intp)
    r1 = np.minimum(r0 + 1, in_h - 1)
    c1 = np.minimum(c0 + 1, in_w - 1)
    fr = (src_r - r0)[:, None]
    fc = (src_c - c0)[None, :]
    p = px.astype(np.float64)
    top = p[np.ix_(r0, c0)] * (1 - fc) + p[np.ix_(r0, c1)] * fc
    bot = p[np.ix_(r1, c0)] * (1 - fc) + p[np.ix_(r1, c1)] * fc
    return top * (1 - fr[:, 0])[:, None] + bot * fr[:, 0][:, None]


def resize_to_standard(seg: GrayImage) -> GrayImage:
    """Bilinear resample to 45x132, then re-threshold at 128 to stay binary."""
    if seg.height == 0 or seg.width == 0:
        raise ValueError("cannot resize an empty image")
    if seg.height == STANDARD_HEIGHT and seg.width == STANDARD_WIDTH:
        resampled = seg.pixels.astype(np.float64)
    else:
        resampled = _bilinear(seg.pixels, STANDARD_HEIGHT, STANDARD_WIDTH)
    return GrayImage(np.where(resampled >= 128, 255, 0).astype(np.uint8))


def image_to_tensor(img: GrayImage) -> np.ndarray:
    """45x132 binary image as a float32 (45, 132, 1) tensor, ink = 1.0."""
    if img.height != STANDARD_HEIGHT or img.width != STANDARD_WIDTH:
        raise ValueError(f"expected {STANDARD_HEIGHT}x{STANDARD_WIDTH} image, "
                         f"got {img.height}x{img.width}")
    return (img.pixels.astype(np.float32) / 255.0)[..., None]
