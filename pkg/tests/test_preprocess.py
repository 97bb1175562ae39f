import numpy as np
import pytest

from printguard.core import GrayImage, Rng
from printguard.preprocess import (BoundingBox, binarize, image_to_tensor,
                                   otsu_threshold, resize_to_standard,
                                   segment_sheet, to_grayscale)
from printguard.textgen import GlyphAtlas, SegmentSpec, render_segment, render_sheet


class TestToGrayscale:
    def test_white_fixed_point(self):
        rgb = np.full((2, 2, 3), 255, dtype=np.uint8)
        assert (to_grayscale(rgb).pixels == 255).all()

    def test_pure_red(self):
        rgb = np.zeros((1, 1, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        assert to_grayscale(rgb).pixels[0, 0] == 76  # round(0.299 * 255)

    def test_gray_fixed_point(self):
        for v in (0, 1, 17, 128, 254, 255):
            rgb = np.full((3, 4, 3), v, dtype=np.uint8)
            assert (to_grayscale(rgb).pixels == v).all()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            to_grayscale(np.zeros((4, 4), dtype=np.uint8))


class TestBinarize:
    def test_constant_image_all_background(self):
        for v in (0, 128, 255):
            img = GrayImage(np.full((6, 6), v, dtype=np.uint8))
            assert binarize(img).ink_count() == 0

    def test_two_spike_histogram(self):
        px = np.full((10, 10), 230, dtype=np.uint8)
        px[:5] = 20
        out = binarize(GrayImage(px))
        assert (out.pixels[:5] == 255).all()   # dark half becomes ink
        assert (out.pixels[5:] == 0).all()

    def test_otsu_separates_two_spikes(self):
        px = np.full((10, 10), 230, dtype=np.uint8)
        px[:5] = 20
        t = otsu_threshold(GrayImage(px))
        assert 20 <= t < 230

    def test_idempotent_on_ink_polarity_binary(self):
        # minority class (ink=255) must survive re-binarization unchanged
        rng = Rng(8)
        px = np.zeros((20, 30), dtype=np.uint8)
        for _ in range(80):
            px[rng.next_below(20), rng.next_below(30)] = 255
        out = binarize(GrayImage(px.copy()))
        assert np.array_equal(out.pixels, px)

    def test_scan_polarity_normalized(self):
        # dark text on light paper -> ink becomes 255
        px = np.full((12, 12), 240, dtype=np.uint8)
        px[4:8, 4:8] = 15
        out = binarize(GrayImage(px))
        assert (out.pixels[4:8, 4:8] == 255).all()
        assert out.ink_count() == 16


class TestResize:
    def test_identity_on_standard_binary(self):
        px = np.where(np.random.default_rng(0).random((45, 132)) < 0.2,
                      255, 0).astype(np.uint8)
        out = resize_to_standard(GrayImage(px.copy()))
        assert np.array_equal(out.pixels, px)

    def test_constant_field(self):
        out = resize_to_standard(GrayImage(np.full((90, 264), 255, np.uint8)))
        assert (out.pixels == 255).all()
        assert out.pixels.shape == (45, 132)

    def test_exact_2x_downscale_matches_block_average(self):
        gen = np.random.default_rng(42)
        px = np.where(gen.random((90, 264)) < 0.35, 255, 0).astype(np.uint8)
        out = resize_to_standard(GrayImage(px))
        # independent oracle: 2x2 block means, then threshold at 128
        blocks = px.reshape(45, 2, 132, 2).mean(axis=(1, 3))
        expected = np.where(blocks >= 128, 255, 0).astype(np.uint8)
        assert np.array_equal(out.pixels, expected)

    def test_output_always_standard_binary(self):
        gen = np.random.default_rng(7)
        for h, w in [(50, 66), (30, 300), (45, 132), (200, 97), (7, 7)]:
            px = np.where(gen.random((h, w)) < 0.3, 255, 0).astype(np.uint8)
            out = resize_to_standard(GrayImage(px))
            assert out.pixels.shape == (45, 132)
            assert out.is_binary()


class TestImageToTensor:
    def test_all_zero(self):
        t = image_to_tensor(GrayImage.blank(45, 132))
        assert t.shape == (45, 132, 1) and t.dtype == np.float32
        assert (t == 0.0).all()

    def test_all_ink(self):
        t = image_to_tensor(GrayImage.blank(45, 132, value=255))
        assert (t == 1.0).all()

    def test_single_pixel(self):
        img = GrayImage.blank(45, 132)
        img.pixels[17, 40] = 255
        t = image_to_tensor(img)
        assert t[17, 40, 0] == 1.0
        assert t.sum() == 1.0

    def test_wrong_dims(self):
        with pytest.raises(ValueError):
            image_to_tensor(GrayImage.blank(45, 131))


class TestSegmentSheet:
    def test_blank_sheet(self):
        assert segment_sheet(GrayImage.blank(200, 300)) == []

    def test_single_word(self):
        atlas = GlyphAtlas(6)
        seg = render_segment(SegmentSpec("HELLO"), atlas)
        sheet = GrayImage.blank(400, 600)
        sheet.pixels[100:100 + seg.height, 200:200 + seg.width] = seg.pixels
        boxes = segment_sheet(sheet)
        assert len(boxes) == 1
        ink = np.argwhere(sheet.pixels)
        b = boxes[0]
        assert b.row0 <= ink[:, 0].min() and ink[:, 0].max() < b.row1
        assert b.col0 <= ink[:, 1].min() and ink[:, 1].max() < b.col1

    def test_grid_against_ground_truth(self):
        atlas = GlyphAtlas(6)
        sheet, truth = render_sheet(Rng(21), 2, 3, atlas)
        boxes = segment_sheet(sheet)
        assert len(boxes) == len(truth) == 6
        for got, expected in zip(boxes, truth):
            assert got.iou(expected) >= 0.8

    def test_boxes_disjoint_and_inked(self):
        atlas = GlyphAtlas(6)
        sheet, _ = render_sheet(Rng(33), 4, 5, atlas)
        boxes = segment_sheet(sheet)
        for i, a in enumerate(boxes):
            assert sheet.pixels[a.row0:a.row1, a.col0:a.col1].any()
            for b in boxes[i + 1:]:
                assert a.iou(b) == 0.0

    def test_reading_order(self):
        atlas = GlyphAtlas(6)
        sheet, truth = render_sheet(Rng(5), 3, 2, atlas)
        boxes = segment_sheet(sheet)
        order = [(b.row0, b.col0) for b in boxes]
        assert order == sorted(order)


class TestBoundingBox:
    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            BoundingBox(5, 5, 5, 10)

    def test_iou_self(self):
        b = BoundingBox(0, 0, 10, 10)
        assert b.iou(b) == 1.0

    def test_iou_disjoint(self):
        assert BoundingBox(0, 0, 5, 5).iou(BoundingBox(5, 5, 9, 9)) == 0.0
