"""printguard: synthetic print-error corpora and a from-scratch CNN detector.

Generates labeled good/defective text segments (line print, line skip, and
blot errors over rendered words), trains a small convolutional network on
them, and classifies segments as readable or defective.
"""

__version__ = "0.1.0"

from .core import GrayImage, Point, Rng, derive_child, draw_line, splitmix64
from .errorsim import (BlotParams, ErrorConfig, ErrorKind, UnviableSampleError,
                       WedgeParams, apply_blot, apply_wedge, corrupt,
                       regenerate, sample_blot_params, sample_wedge_params)
from .preprocess import (BoundingBox, binarize, image_to_tensor,
                         resize_to_standard, segment_sheet, to_grayscale)
from .textgen import (GlyphAtlas, SegmentSpec, render_segment, render_sheet,
                      sample_word)

__all__ = [
    "BlotParams", "BoundingBox", "ErrorConfig", "ErrorKind", "GlyphAtlas",
    "GrayImage", "Point", "Rng", "SegmentSpec", "UnviableSampleError",
    "WedgeParams", "apply_blot", "apply_wedge", "binarize", "corrupt",
    "derive_child", "draw_line", "image_to_tensor", "regenerate",
    "render_segment", "render_sheet", "resize_to_standard", "sample_blot_params",
    "sample_wedge_params", "sample_word", "segment_sheet", "splitmix64",
    "to_grayscale",
]
