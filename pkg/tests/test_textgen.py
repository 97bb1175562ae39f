import numpy as np
import pytest

from printguard.core import Rng
from printguard.textgen import (ALPHABET, GlyphAtlas, SegmentSpec,
                                render_segment, render_sheet, sample_word,
                                segment_width)


@pytest.fixture(scope="module")
def atlas():
    return GlyphAtlas(scale=6)


class TestAtlas:
    def test_cell_dimensions(self, atlas):
        assert atlas.cell_height == 42 and atlas.cell_width == 30
        for ch in ALPHABET:
            g = atlas.glyph(ch)
            assert g.shape == (42, 30)
            assert set(np.unique(g)) <= {0, 255}

    def test_every_glyph_touches_its_cell_edges(self, atlas):
        # guarantees tight ink bounds == cell bounds for any rendered word
        for ch in ALPHABET:
            g = atlas.glyph(ch)
            assert g[0].any(), ch
            assert g[-1].any(), ch
            assert g[:, 0].any(), ch
            assert g[:, -1].any(), ch

    def test_unknown_glyph(self, atlas):
        with pytest.raises(ValueError):
            atlas.glyph("a")


class TestSampleWord:
    def test_degenerate_length(self):
        rng = Rng(3)
        for _ in range(50):
            w = sample_word(rng, 1, 1)
            assert len(w) == 1 and w in ALPHABET

    def test_range_containment(self):
        rng = Rng(5)
        lengths = set()
        for _ in range(10_000):
            w = sample_word(rng, 2, 8)
            lengths.add(len(w))
            assert set(w) <= set(ALPHABET)
        assert lengths == set(range(2, 9))

    def test_deterministic(self):
        words1 = [sample_word(Rng(9, 2 * i + 1), 2, 8) for i in range(20)]
        words2 = [sample_word(Rng(9, 2 * i + 1), 2, 8) for i in range(20)]
        assert words1 == words2

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            sample_word(Rng(1), 5, 2)
        with pytest.raises(ValueError):
            sample_word(Rng(1), 0, 3)


class TestRenderSegment:
    def test_single_glyph_geometry(self, atlas):
        img = render_segment(SegmentSpec("A", margin=4), atlas)
        assert img.width == 2 * 4 + 30
        assert img.height == 42 + 2 * 4
        rows = np.flatnonzero(img.pixels.any(axis=1))
        assert rows[0] == 4 and rows[-1] == 4 + 42 - 1  # vertically centred

    def test_yv_conjoined_columns(self, atlas):
        # kerning -2 must make Y and V share ink columns
        img = render_segment(SegmentSpec("YV", kerning=-2, margin=4), atlas)
        assert img.width == 2 * 4 + 2 * 30 - 2
        y_only = render_segment(SegmentSpec("Y", margin=4), atlas)
        v_only = render_segment(SegmentSpec("V", margin=4), atlas)
        y_cols = np.flatnonzero(y_only.pixels.any(axis=0))
        # V starts at col 4 + 30 - 2 = 32 in the pair image
        v_cols = np.flatnonzero(v_only.pixels.any(axis=0)) + 28
        assert set(y_cols) & set(v_cols), "no column holds ink from both glyphs"

    def test_values_binary_and_nonempty(self, atlas):
        rng = Rng(17)
        for _ in range(30):
            img = render_segment(SegmentSpec(sample_word(rng, 2, 8)), atlas)
            assert img.is_binary()
            assert img.ink_count() > 0

    def test_width_strictly_increases_with_length(self, atlas):
        spec_widths = [segment_width(SegmentSpec("A" * n), atlas)
                       for n in range(1, 9)]
        assert all(b > a for a, b in zip(spec_widths, spec_widths[1:]))

    def test_rejects_unsupported_characters(self):
        with pytest.raises(ValueError):
            SegmentSpec("A1")
        with pytest.raises(ValueError):
            SegmentSpec("")

    def test_deterministic(self, atlas):
        a = render_segment(SegmentSpec("KERN"), atlas)
        b = render_segment(SegmentSpec("KERN"), atlas)
        assert np.array_equal(a.pixels, b.pixels)


class TestRenderSheet:
    def test_empty_layout(self, atlas):
        sheet, boxes = render_sheet(Rng(1), 0, 0, atlas)
        assert boxes == []
        assert sheet.ink_count() == 0
        assert (sheet.height, sheet.width) == (4200, 3500)

    def test_grid_disjoint(self, atlas):
        _, boxes = render_sheet(Rng(2), 2, 3, atlas)
        assert len(boxes) == 6
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                assert a.iou(b) == 0.0

    def test_boxes_cover_all_ink(self, atlas):
        sheet, boxes = render_sheet(Rng(3), 3, 4, atlas)
        mask = np.zeros_like(sheet.pixels, dtype=bool)
        for box in boxes:
            sub = sheet.pixels[box.row0:box.row1, box.col0:box.col1]
            assert sub.any(), "box contains no ink"
            mask[box.row0:box.row1, box.col0:box.col1] = True
        assert not sheet.pixels[~mask].any(), "ink outside every box"

    def test_layout_overflow(self, atlas):
        with pytest.raises(ValueError):
            render_sheet(Rng(4), 100, 100, atlas)

    def test_deterministic(self, atlas):
        s1, b1 = render_sheet(Rng(5), 2, 2, atlas)
        s2, b2 = render_sheet(Rng(5), 2, 2, atlas)
        assert np.array_equal(s1.pixels, s2.pixels)
        assert b1 == b2
