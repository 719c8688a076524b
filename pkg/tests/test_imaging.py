import numpy as np
import pytest

from chatseg.errors import DimensionMismatchError, MaskDecodeError
from chatseg.imaging import (
    BinaryMask,
    Granularity,
    ImageBuffer,
    classify_granularity,
    mask_area,
    mask_iou,
    mask_to_png,
    png_to_mask,
)


def checkerboard(h, w):
    idx = np.indices((h, w)).sum(axis=0)
    return BinaryMask((idx % 2) == 0)


class TestImageBuffer:
    def test_valid_construction(self):
        img = ImageBuffer(np.zeros((8, 8, 3), dtype=np.float32))
        assert img.width == 8 and img.height == 8 and img.channels == 3

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            ImageBuffer(np.zeros((4, 8, 3)))

    def test_out_of_range_rejected(self):
        arr = np.zeros((8, 8, 3))
        arr[0, 0, 0] = 1.5
        with pytest.raises(ValueError):
            ImageBuffer(arr)

    def test_non_finite_rejected(self):
        arr = np.zeros((8, 8, 3))
        arr[1, 1, 1] = np.nan
        with pytest.raises(ValueError):
            ImageBuffer(arr)

    def test_immutable(self):
        img = ImageBuffer(np.zeros((8, 8, 3)))
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_png_round_trip(self):
        rng = np.random.default_rng(0)
        img = ImageBuffer.from_uint8(rng.integers(0, 256, size=(16, 12, 3), dtype=np.uint8))
        again = ImageBuffer.from_png(img.to_png())
        assert np.array_equal(img.to_uint8(), again.to_uint8())


class TestMaskArea:
    def test_empty(self):
        assert mask_area(BinaryMask.zeros(4, 4)) == 0

    def test_full(self):
        assert mask_area(BinaryMask(np.ones((4, 4), dtype=bool))) == 16

    def test_checkerboard(self):
        # brute-force oracle: count bits one by one
        m = checkerboard(4, 4)
        expected = sum(bool(m.bits[r, c]) for r in range(4) for c in range(4))
        assert expected == 8
        assert mask_area(m) == expected


class TestMaskIou:
    def test_identical_nonempty(self):
        m = checkerboard(4, 4)
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((4, 4), dtype=bool)
        a[:2] = True
        b = np.zeros((4, 4), dtype=bool)
        b[2:] = True
        assert mask_iou(BinaryMask(a), BinaryMask(b)) == 0.0

    def test_top_half_vs_left_half(self):
        # enumerate pixels: intersection 4 (top-left quadrant), union 12
        a = np.zeros((4, 4), dtype=bool)
        a[:2, :] = True
        b = np.zeros((4, 4), dtype=bool)
        b[:, :2] = True
        assert mask_iou(BinaryMask(a), BinaryMask(b)) == pytest.approx(4 / 12)

    def test_both_empty_is_perfect_agreement(self):
        assert mask_iou(BinaryMask.zeros(4, 4), BinaryMask.zeros(4, 4)) == 1.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            mask_iou(BinaryMask.zeros(4, 4), BinaryMask.zeros(4, 5))

    def test_symmetry_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = BinaryMask(rng.random((6, 5)) < 0.5)
            b = BinaryMask(rng.random((6, 5)) < 0.5)
            assert mask_iou(a, b) == mask_iou(b, a)


class TestGranularity:
    def test_minimum_fine_area(self):
        # 304 px is well under (1.6*32)^2 = 2621.44
        assert classify_granularity(304, 1.6).value is Granularity.FINE

    def test_fine_medium_boundary(self):
        assert classify_granularity(2621, 1.6).value is Granularity.FINE
        assert classify_granularity(2622, 1.6).value is Granularity.MEDIUM

    def test_coarse_boundary(self):
        # (1.6*96)^2 = 23592.96
        assert classify_granularity(23592, 1.6).value is Granularity.MEDIUM
        assert classify_granularity(23594, 1.6).value is Granularity.COARSE

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(ValueError):
            classify_granularity(100, 0.0)
        with pytest.raises(ValueError):
            classify_granularity(100, -1.0)

    def test_negative_area_rejected(self):
        with pytest.raises(ValueError):
            classify_granularity(-1, 1.6)

    def test_monotone_in_area(self):
        order = {Granularity.FINE: 0, Granularity.MEDIUM: 1, Granularity.COARSE: 2}
        rng = np.random.default_rng(3)
        for s in (0.5, 1.0, 1.6, 3.0):
            areas = np.sort(rng.integers(0, 60000, size=200))
            labels = [order[classify_granularity(int(a), s).value] for a in areas]
            assert all(x <= y for x, y in zip(labels, labels[1:]))


class TestMaskPng:
    def test_round_trip_identity(self):
        rng = np.random.default_rng(11)
        m = BinaryMask(rng.random((16, 16)) < 0.4)
        assert png_to_mask(mask_to_png(m)) == m

    def test_round_trip_various_sizes(self):
        rng = np.random.default_rng(5)
        for h, w in [(8, 8), (9, 31), (64, 33), (128, 128), (1024, 8)]:
            m = BinaryMask(rng.random((h, w)) < 0.5)
            assert png_to_mask(mask_to_png(m)) == m

    def test_checkerboard_area_after_round_trip(self):
        m = checkerboard(16, 16)
        assert mask_area(png_to_mask(mask_to_png(m))) == 128

    def test_non_binary_value_rejected(self):
        import io

        from PIL import Image

        arr = np.zeros((8, 8), dtype=np.uint8)
        arr[2, 3] = 128
        buf = io.BytesIO()
        Image.fromarray(arr, mode="L").save(buf, format="PNG")
        with pytest.raises(MaskDecodeError):
            png_to_mask(buf.getvalue())

    def test_rgb_png_rejected(self):
        import io

        from PIL import Image

        arr = np.zeros((8, 8, 3), dtype=np.uint8)
        buf = io.BytesIO()
        Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
        with pytest.raises(MaskDecodeError):
            png_to_mask(buf.getvalue())

    def test_garbage_bytes_rejected(self):
        with pytest.raises(MaskDecodeError):
            png_to_mask(b"not a png at all")
