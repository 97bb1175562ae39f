"""Synthetic "good" text rendering.

Real production scans are not available, so segments are rendered from an
embedded 5x7 dot-matrix uppercase font scaled by an integer factor. The
default kerning of -2 px makes a controlled fraction of neighbouring glyphs
touch (the kind of conjoined pair that defeats character recognizers), which
keeps the hard cases in the corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GrayImage, Rng
from .preprocess import BoundingBox

# 5 cols x 7 rows per glyph, 'X' = ink.
_FONT_5X7 = {
    "A": (".XXX.", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "B": ("XXXX.", "X...X", "X...X", "XXXX.", "X...X", "X...X", "XXXX."),
    "C": (".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."),
    "D": ("XXXX.", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXX."),
    "E": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "XXXXX"),
    "F": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "X...."),
    "G": (".XXX.", "X...X", "X....", "X.XXX", "X...X", "X...X", ".XXXX"),
    "H": ("X...X", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "I": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "XXXXX"),
    "J": ("..XXX", "...X.", "...X.", "...X.", "...X.", "X..X.", ".XX.."),
    "K": ("X...X", "X..X.", "X.X..", "XX...", "X.X..", "X..X.", "X...X"),
    "L": ("X....", "X....", "X....", "X....", "X....", "X....", "XXXXX"),
    "M": ("X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"),
    "N": ("X...X", "XX..X", "X.X.X", "X..XX", "X...X", "X...X", "X...X"),
    "O": (".XXX.", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "P": ("XXXX.", "X...X", "X...X", "XXXX.", "X....", "X....", "X...."),
    "Q": (".XXX.", "X...X", "X...X", "X...X", "X.X.X", "X..X.", ".XX.X"),
    "R": ("XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"),
    "S": (".XXXX", "X....", "X....", ".XXX.", "....X", "....X", "XXXX."),
    "T": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "..X.."),
    "U": ("X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "V": ("X...X", "X...X", "X...X", "X...X", "X...X", ".X.X.", "..X.."),
    "W": ("X...X", "X...X", "X...X", "X.X.X", "X.X.X", "XX.XX", "X...X"),
    "X": ("X...X", "X...X", ".X.X.", "..X..", ".X.X.", "X...X", "X...X"),
    "Y": ("X...X", "X...X", ".X.X.", "..X..", "..X..", "..X..", "..X.."),
    "Z": ("XXXXX", "....X", "...X.", "..X..", ".X...", "X....", "XXXXX"),
}

BASE_GLYPH_ROWS = 7
BASE_GLYPH_COLS = 5
ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

# Sheet-scale constants: the production scans this stands in for.
SHEET_WIDTH = 3500
SHEET_HEIGHT = 4200
SHEET_MARGIN = 100
MIN_ROW_GAP = 30
MIN_WORD_GAP = 20


class GlyphAtlas:
    """26 binary A-Z bitmaps at an integer scale of the 5x7 base cell."""

    def __init__(self, scale: int = 6):
        if scale < 1:
            raise ValueError(f"scale must be >= 1, got {scale}")
        self.scale = scale
        self.cell_height = BASE_GLYPH_ROWS * scale
        self.cell_width = BASE_GLYPH_COLS * scale
        self.glyphs: dict[str, np.ndarray] = {}
        for ch, rows in _FONT_5X7.items():
            base = np.array([[255 if c == "X" else 0 for c in row] for row in rows],
                            dtype=np.uint8)
            self.glyphs[ch] = np.repeat(np.repeat(base, scale, axis=0), scale, axis=1)

    def glyph(self, ch: str) -> np.ndarray:
        try:
            return self.glyphs[ch]
        except KeyError:
            raise ValueError(f"unsupported glyph {ch!r} (A-Z only)") from None


@dataclass
class SegmentSpec:
    """A single word to render: A-Z only, with kerning and margin in pixels."""

    word: str
    kerning: int = -2
    margin: int = 4

    def __post_init__(self):
        if not self.word:
            raise ValueError("word must be non-empty")
        bad = set(self.word) - set(ALPHABET)
        if bad:
            raise ValueError(f"unsupported glyphs {sorted(bad)} (A-Z only)")


def sample_word(rng: Rng, len_lo: int, len_hi: int) -> str:
    """Word of uniform length in [len_lo, len_hi], characters uniform A-Z."""
    if not (1 <= len_lo <= len_hi):
        raise ValueError(f"invalid length range [{len_lo}, {len_hi}]")
    n = len_lo + rng.next_below(len_hi - len_lo + 1)
    return "".join(ALPHABET[rng.next_below(26)] for _ in range(n))


def segment_width(spec: SegmentSpec, atlas: GlyphAtlas) -> int:
    n = len(spec.word)
    return 2 * spec.margin + n * atlas.cell_width + (n - 1) * spec.kerning


def render_segment(spec: SegmentSpec, atlas: GlyphAtlas) -> GrayImage:
    """Blit the word's glyphs left to right; overlapping ink combines by max."""
    if spec.kerning <= -atlas.cell_width:
        raise ValueError(f"kerning {spec.kerning} collapses {atlas.cell_width}px cells")
    width = segment_width(spec, atlas)
    if width <= 0:
        raise ValueError(f"rendered width {width} not positive")
    height = atlas.cell_height + 2 * spec.margin
    canvas = np.zeros((height, width), dtype=np.uint8)
    x = spec.margin
    for ch in spec.word:
        g = atlas.glyph(ch)
        region = canvas[spec.margin:spec.margin + atlas.cell_height,
                        x:x + atlas.cell_width]
        np.maximum(region, g, out=region)
        x += atlas.cell_width + spec.kerning
    return GrayImage(canvas)


def render_sheet(rng: Rng, rows: int, words_per_row: int,
                 atlas: GlyphAtlas, len_lo: int = 2, len_hi: int = 8,
                 kerning: int = -2, margin: int = 4,
                 ) -> tuple[GrayImage, list[BoundingBox]]:
    """Full-size sheet with random words on a regular grid.

    Returns the sheet plus the exact placement box of every rendered word,
    suitable as a segmentation ground truth. Column pitch is sized for the
    widest possible word so the grid stays regular.
    """
    if rows < 0 or words_per_row < 0:
        raise ValueError("rows and words_per_row must be non-negative")
    sheet = GrayImage.blank(SHEET_HEIGHT, SHEET_WIDTH)
    boxes: list[BoundingBox] = []
    if rows == 0 or words_per_row == 0:
        return sheet, boxes

    seg_height = atlas.cell_height + 2 * margin
    max_width = 2 * margin + len_hi * atlas.cell_width + (len_hi - 1) * kerning
    col_pitch = max_width + MIN_WORD_GAP
    row_pitch = seg_height + MIN_ROW_GAP
    need_h = 2 * SHEET_MARGIN + rows * row_pitch - MIN_ROW_GAP
    need_w = 2 * SHEET_MARGIN + words_per_row * col_pitch - MIN_WORD_GAP
    if need_h > SHEET_HEIGHT or need_w > SHEET_WIDTH:
        raise ValueError(f"layout {rows}x{words_per_row} needs {need_w}x{need_h}, "
                         f"canvas is {SHEET_WIDTH}x{SHEET_HEIGHT}")

    for r in range(rows):
        for c in range(words_per_row):
            word = sample_word(rng, len_lo, len_hi)
            seg = render_segment(SegmentSpec(word, kerning, margin), atlas)
            top = SHEET_MARGIN + r * row_pitch
            left = SHEET_MARGIN + c * col_pitch
            sheet.pixels[top:top + seg.height, left:left + seg.width] = seg.pixels
            boxes.append(BoundingBox(top, left, top + seg.height, left + seg.width))
    return sheet, boxes
