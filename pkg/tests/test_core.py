"""Morphology, box geometry, IoU and PNG round-trips against brute-force
window-scan oracles."""
import numpy as np
import pytest

from amcpseg.core import (Rect, bbox_of, dilate, erode, iou,
                          load_image_png, load_mask_png, morph_clean, rings,
                          save_image_png, save_mask_png)
from amcpseg.errors import AmcpError, DimensionMismatch, EmptyMask


def brute_dilate(mask, radius):
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            y0, y1 = max(0, y - radius), min(h, y + radius + 1)
            x0, x1 = max(0, x - radius), min(w, x + radius + 1)
            out[y, x] = mask[y0:y1, x0:x1].any()
    return out


def brute_erode(mask, radius):
    h, w = mask.shape
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            # windows reaching past the border see background
            if y - radius < 0 or x - radius < 0 or y + radius >= h or x + radius >= w:
                out[y, x] = False
                continue
            out[y, x] = mask[y - radius:y + radius + 1, x - radius:x + radius + 1].all()
    return out


def random_masks(n, max_side=32, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        h = int(rng.integers(4, max_side + 1))
        w = int(rng.integers(4, max_side + 1))
        density = rng.uniform(0.1, 0.9)
        yield rng.random((h, w)) < density


class TestDilateErode:
    def test_single_pixel_dilation(self):
        m = np.zeros((11, 11), dtype=bool)
        m[5, 5] = True
        d = dilate(m, 1)
        expect = np.zeros_like(m)
        expect[4:7, 4:7] = True
        assert np.array_equal(d, expect)

    def test_empty_mask_is_fixed_point(self):
        m = np.zeros((8, 8), dtype=bool)
        assert not dilate(m, 2).any()

    def test_full_mask_erosion_drops_border(self):
        m = np.ones((9, 9), dtype=bool)
        e = erode(m, 1)
        expect = np.zeros_like(m)
        expect[1:-1, 1:-1] = True
        assert np.array_equal(e, expect)

    def test_single_pixel_erodes_away(self):
        m = np.zeros((7, 7), dtype=bool)
        m[3, 3] = True
        assert not erode(m, 1).any()

    def test_matches_window_scan_oracle(self):
        for i, m in enumerate(random_masks(60, seed=11)):
            r = 1 + i % 3
            assert np.array_equal(dilate(m, r), brute_dilate(m, r))
            assert np.array_equal(erode(m, r), brute_erode(m, r))

    def test_monotone(self):
        for m in random_masks(20, seed=3):
            assert (dilate(m, 2) | m).sum() == dilate(m, 2).sum()
            assert (erode(m, 2) & m).sum() == erode(m, 2).sum()

    def test_duality_on_extended_canvas(self):
        # erode(m) == complement of dilate(complement of m), where the
        # complement is taken on a canvas padded with background
        rng = np.random.default_rng(5)
        for _ in range(40):
            h, w = rng.integers(4, 20, size=2)
            m = rng.random((h, w)) < rng.uniform(0.2, 0.8)
            r = int(rng.integers(1, 4))
            big = np.zeros((h + 2 * r, w + 2 * r), dtype=bool)
            big[r:r + h, r:r + w] = m
            dual = ~dilate(~big, r)[r:r + h, r:r + w]
            assert np.array_equal(erode(m, r), dual)


class TestRings:
    def test_centered_square(self):
        m = np.zeros((20, 20), dtype=bool)
        m[5:15, 5:15] = True
        inner, outer = rings(m, 2)
        assert np.array_equal(inner, m & ~brute_erode(m, 2))
        assert np.array_equal(outer, brute_dilate(m, 2) & ~m)
        assert inner.sum() == 100 - 36          # 10x10 minus the 6x6 core
        assert outer.sum() == 14 * 14 - 100     # 14x14 halo minus the square
        assert not (inner & outer).any()
        assert not (inner & ~m).any()
        assert not (outer & m).any()

    def test_empty_mask(self):
        inner, outer = rings(np.zeros((8, 8), dtype=bool), 2)
        assert not inner.any() and not outer.any()

    def test_full_mask(self):
        m = np.ones((10, 10), dtype=bool)
        inner, outer = rings(m, 2)
        assert not outer.any()
        expect = m & ~brute_erode(m, 2)
        assert np.array_equal(inner, expect)

    def test_partition_covers_frame(self):
        for m in random_masks(15, seed=7):
            if not m.any():
                continue
            inner, outer = rings(m, 2)
            core = m & ~inner
            far = ~m & ~outer
            total = inner.astype(int) + outer.astype(int) + core.astype(int) + far.astype(int)
            assert (total == 1).all()

    def test_matches_set_difference_oracle(self):
        for m in random_masks(30, seed=13):
            if not m.any():
                continue
            inner, outer = rings(m, 2)
            assert np.array_equal(inner, m & ~brute_erode(m, 2))
            assert np.array_equal(outer, brute_dilate(m, 2) & ~m)


class TestMorphClean:
    def test_removes_isolated_pixel(self):
        m = np.zeros((20, 20), dtype=bool)
        m[10, 10] = True
        assert not morph_clean(m, 5).any()

    def test_fills_interior_hole(self):
        m = np.zeros((20, 20), dtype=bool)
        m[5:15, 5:15] = True
        m[9, 9] = False
        cleaned = morph_clean(m, 5)
        expect = np.zeros_like(m)
        expect[5:15, 5:15] = True
        assert np.array_equal(cleaned, expect)

    def test_empty_mask(self):
        assert not morph_clean(np.zeros((10, 10), dtype=bool), 5).any()

    def test_matches_compose_oracle(self):
        # close-then-open built from the brute-force filters
        r = 2
        for m in random_masks(25, seed=17):
            h, w = m.shape
            closed_d = brute_dilate(m, r)
            # closing erosion treats the border as foreground
            pad = np.ones((h + 2 * r, w + 2 * r), dtype=bool)
            pad[r:r + h, r:r + w] = closed_d
            closed = brute_erode(pad, r)[r:r + h, r:r + w]
            opened = brute_dilate(brute_erode(closed, r), r)
            assert np.array_equal(morph_clean(m, 5), opened)

    def test_kernel_must_be_odd(self):
        with pytest.raises(AmcpError):
            morph_clean(np.zeros((5, 5), dtype=bool), 4)


class TestBBox:
    def setup_method(self):
        self.m = np.zeros((100, 100), dtype=bool)
        self.m[20:40, 20:40] = True

    def test_tight(self):
        assert bbox_of(self.m, 1.0) == Rect(20, 20, 40, 40)

    def test_scaled(self):
        assert bbox_of(self.m, 1.1) == Rect(19, 19, 41, 41)

    def test_clamped_at_edges(self):
        m = np.zeros((50, 50), dtype=bool)
        m[0:10, 40:50] = True
        r = bbox_of(m, 1.2)
        assert r.x0 >= 0 and r.y0 >= 0 and r.x1 <= 50 and r.y1 <= 50
        assert r.contains(Rect(40, 0, 50, 10))

    def test_rate_monotone(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            m = np.zeros((60, 60), dtype=bool)
            y, x = rng.integers(5, 40, size=2)
            m[y:y + rng.integers(3, 15), x:x + rng.integers(3, 15)] = True
            r1, r2 = sorted(rng.uniform(1.0, 1.6, size=2))
            assert bbox_of(m, r2).contains(bbox_of(m, r1))

    def test_odd_width_tight_at_rate_one(self):
        m = np.zeros((9, 9), dtype=bool)
        m[2:7, 1:6] = True
        assert bbox_of(m, 1.0) == Rect(1, 2, 6, 7)

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyMask):
            bbox_of(np.zeros((5, 5), dtype=bool))


class TestIoU:
    def test_identical(self):
        m = np.zeros((10, 10), dtype=bool)
        m[2:5, 2:5] = True
        assert iou(m, m) == 1.0

    def test_disjoint(self):
        a = np.zeros((10, 10), dtype=bool)
        b = np.zeros((10, 10), dtype=bool)
        a[0:2, 0:2] = True
        b[5:7, 5:7] = True
        assert iou(a, b) == 0.0

    def test_partial_overlap(self):
        a = np.zeros((10, 10), dtype=bool)
        b = np.zeros((10, 10), dtype=bool)
        a[0, 0:4] = True
        b[0, 2:6] = True
        assert iou(a, b) == pytest.approx(2 / 6)

    def test_both_empty(self):
        e = np.zeros((4, 4), dtype=bool)
        assert iou(e, e) == 1.0

    def test_symmetric(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            a = rng.random((12, 12)) < 0.4
            b = rng.random((12, 12)) < 0.4
            assert iou(a, b) == iou(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            iou(np.zeros((4, 4), dtype=bool), np.zeros((5, 4), dtype=bool))


class TestPngIO:
    def test_image_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        img = np.round(rng.random((16, 20, 3)) * 255) / 255
        p = tmp_path / "img.png"
        save_image_png(img, p)
        assert np.array_equal(load_image_png(p), img)

    def test_mask_roundtrip(self, tmp_path):
        m = np.zeros((9, 7), dtype=bool)
        m[2:5, 1:4] = True
        p = tmp_path / "m.png"
        save_mask_png(m, p)
        assert np.array_equal(load_mask_png(p), m)

    def test_rejects_non_rgb(self, tmp_path):
        from PIL import Image
        p = tmp_path / "gray.png"
        Image.new("L", (4, 4)).save(p)
        with pytest.raises(AmcpError):
            load_image_png(p)

    def test_rejects_non_binary_mask(self, tmp_path):
        from PIL import Image
        import numpy as np
        p = tmp_path / "soft.png"
        Image.fromarray(np.full((4, 4), 128, dtype=np.uint8), mode="L").save(p)
        with pytest.raises(AmcpError):
            load_mask_png(p)

    def test_rejects_rgb_as_mask(self, tmp_path):
        from PIL import Image
        p = tmp_path / "rgb.png"
        Image.new("RGB", (4, 4)).save(p)
        with pytest.raises(AmcpError):
            load_mask_png(p)
