"""The three contrast terms and their weighted combination."""
import numpy as np
import pytest

from amcpseg.core import Rect, full_rect
from amcpseg.errors import AmcpError, DimensionMismatch, NoPromptPoints
from amcpseg.potential import (ContrastField, GaussianSigma, PotentialWeights,
                               combine, phi_color, phi_paint, phi_prompt)


class TestPhiPaint:
    def test_identical_features_zero(self):
        f = np.random.default_rng(0).random((6, 6, 4))
        out = phi_paint(f, f, full_rect(6, 6))
        assert (out.values == 0).all()

    def test_pythagorean_single_pixel(self):
        a = np.zeros((4, 4, 2))
        b = a.copy()
        b[1, 2] = [3.0, 4.0]
        out = phi_paint(a, b, full_rect(4, 4))
        assert out.values[1, 2] == pytest.approx(5.0)
        assert out.values.sum() == pytest.approx(5.0)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(1)
        a = rng.random((8, 8, 4))
        b = rng.random((8, 8, 4))
        out = phi_paint(a, b, full_rect(8, 8))
        for y in range(8):
            for x in range(8):
                expect = sum((a[y, x, c] - b[y, x, c]) ** 2 for c in range(4)) ** 0.5
                assert out.values[y, x] == pytest.approx(expect, abs=1e-6)

    def test_symmetric_nonnegative(self):
        rng = np.random.default_rng(2)
        a, b = rng.random((5, 5, 3)), rng.random((5, 5, 3))
        roi = Rect(1, 1, 4, 4)
        ab = phi_paint(a, b, roi)
        ba = phi_paint(b, a, roi)
        assert np.allclose(ab.values, ba.values)
        assert (ab.values >= 0).all()

    def test_zeroed_outside_roi(self):
        rng = np.random.default_rng(3)
        a, b = rng.random((6, 6, 3)), rng.random((6, 6, 3))
        out = phi_paint(a, b, Rect(2, 2, 4, 4))
        outside = np.ones((6, 6), dtype=bool)
        outside[2:4, 2:4] = False
        assert (out.values[outside] == 0).all()
        assert (out.values[2:4, 2:4] > 0).all()

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            phi_paint(np.zeros((4, 4, 2)), np.zeros((4, 4, 3)), full_rect(4, 4))


class TestPhiColor:
    def test_separable_colors(self):
        img = np.zeros((10, 10, 3))
        mask = np.zeros((10, 10), dtype=bool)
        mask[:, :5] = True
        img[mask] = [0.9, 0.05, 0.05]
        img[~mask] = [0.05, 0.05, 0.9]
        out = phi_color(img, mask, full_rect(10, 10), n_components=2)
        assert (out.values[mask] > 0.95).all()
        assert (out.values[~mask] < 0.05).all()

    def test_uniform_image_is_uninformative(self):
        img = np.full((8, 8, 3), 0.5)
        mask = np.zeros((8, 8), dtype=bool)
        mask[2:6, 2:6] = True
        out = phi_color(img, mask, full_rect(8, 8), n_components=2)
        assert np.allclose(out.roi_values(), 0.5, atol=0.05)

    def test_probability_range(self):
        rng = np.random.default_rng(4)
        img = rng.random((12, 12, 3))
        mask = rng.random((12, 12)) < 0.5
        mask[0, 0], mask[-1, -1] = True, False
        out = phi_color(img, mask, full_rect(12, 12))
        v = out.roi_values()
        assert v.min() >= 0.0 and v.max() <= 1.0

    def test_matches_closed_form_bayes_posterior(self):
        # each region drawn from one isotropic Gaussian with known parameters
        rng = np.random.default_rng(5)
        mu_fg, mu_bg = np.array([0.7, 0.6, 0.5]), np.array([0.3, 0.35, 0.4])
        sd = 0.05
        mask = np.zeros((40, 40), dtype=bool)
        mask[:, :20] = True
        img = np.empty((40, 40, 3))
        img[mask] = np.clip(rng.normal(mu_fg, sd, (mask.sum(), 3)), 0, 1)
        img[~mask] = np.clip(rng.normal(mu_bg, sd, ((~mask).sum(), 3)), 0, 1)
        out = phi_color(img, mask, full_rect(40, 40), n_components=1)

        def logpdf(x, mu):
            return -0.5 * (((x - mu) / sd) ** 2).sum(axis=-1) - 3 * np.log(sd)

        bayes = 1.0 / (1.0 + np.exp(logpdf(img, mu_bg) - logpdf(img, mu_fg)))
        assert np.abs(out.values - bayes).max() < 0.05

    def test_needs_both_regions(self):
        img = np.full((6, 6, 3), 0.5)
        with pytest.raises(AmcpError):
            phi_color(img, np.ones((6, 6), dtype=bool), full_rect(6, 6))


class TestPhiPrompt:
    def test_unit_at_prompt_point(self):
        sig = GaussianSigma(3.0, 3.0)
        out = phi_prompt([(5.0, 4.0)], sig, full_rect(10, 10), (10, 10))
        assert out.values[4, 5] == pytest.approx(1.0)

    def test_one_sigma_offset(self):
        sig = GaussianSigma(3.0, 5.0)
        out = phi_prompt([(5.0, 5.0)], sig, full_rect(12, 12), (12, 12))
        assert out.values[5, 8] == pytest.approx(np.exp(-1.0))
        assert out.values[10, 5] == pytest.approx(np.exp(-1.0))

    def test_two_points_pointwise_max(self):
        sig = GaussianSigma(2.0, 2.0)
        shape = (16, 16)
        roi = full_rect(*shape)
        a = phi_prompt([(3.0, 3.0)], sig, roi, shape)
        b = phi_prompt([(11.0, 12.0)], sig, roi, shape)
        both = phi_prompt([(3.0, 3.0), (11.0, 12.0)], sig, roi, shape)
        assert np.allclose(both.values, np.maximum(a.values, b.values))

    def test_translation_equivariance(self):
        sig = GaussianSigma(2.5, 2.5)
        shape = (20, 20)
        roi = full_rect(*shape)
        base = phi_prompt([(6.0, 7.0)], sig, roi, shape)
        shifted = phi_prompt([(9.0, 11.0)], sig, roi, shape)
        assert np.allclose(shifted.values[4 + 4:, 3 + 3:],
                           base.values[4:-4, 3:-3][:len(shifted.values) - 8])

    def test_no_points(self):
        with pytest.raises(NoPromptPoints):
            phi_prompt([], GaussianSigma(1, 1), full_rect(4, 4), (4, 4))


def const_field(value, roi, shape):
    v = np.zeros(shape)
    ys, xs = roi.slices
    v[ys, xs] = value
    return ContrastField(v, roi)


class TestCombine:
    def setup_method(self):
        self.roi = full_rect(6, 6)
        self.shape = (6, 6)
        self.w = PotentialWeights()

    def test_paper_constants_istep(self):
        one = const_field(1.0, self.roi, self.shape)
        out = combine(one, one, one, self.w, "I")
        assert np.allclose(out.roi_values(), 0.8 + 0.2 + 0.2)

    def test_prompt_sign_flips_in_ostep(self):
        one = const_field(1.0, self.roi, self.shape)
        half = const_field(0.5, self.roi, self.shape)
        out = combine(one, half, one, self.w, "O")
        assert np.allclose(out.roi_values(), 0.8 + 0.1 - 0.2)

    def test_prompt_term_omitted(self):
        one = const_field(1.0, self.roi, self.shape)
        out = combine(one, one, None, self.w, "I")
        assert np.allclose(out.roi_values(), 1.0)

    def test_all_zero(self):
        zero = const_field(0.0, self.roi, self.shape)
        out = combine(zero, zero, zero, self.w, "I")
        assert (out.values == 0).all()

    def test_paint_normalized_by_roi_max(self):
        rng = np.random.default_rng(6)
        paint = ContrastField(rng.random(self.shape) * 7.0, self.roi)
        zero = const_field(0.0, self.roi, self.shape)
        out = combine(paint, zero, None, self.w, "I")
        assert np.allclose(out.values, 0.8 * paint.values / paint.values.max())

    def test_paint_scale_invariance(self):
        rng = np.random.default_rng(7)
        paint = ContrastField(rng.random(self.shape), self.roi)
        color = ContrastField(rng.random(self.shape), self.roi)
        a = combine(paint, color, None, self.w, "I")
        scaled = ContrastField(paint.values * 13.0, self.roi)
        b = combine(scaled, color, None, self.w, "I")
        assert np.allclose(a.values, b.values)

    def test_additive_in_color_for_istep(self):
        rng = np.random.default_rng(8)
        paint = ContrastField(rng.random(self.shape), self.roi)
        c1 = ContrastField(rng.random(self.shape) * 0.5, self.roi)
        c2 = ContrastField(rng.random(self.shape) * 0.5, self.roi)
        zero = const_field(0.0, self.roi, self.shape)
        both = combine(paint, ContrastField(c1.values + c2.values, self.roi),
                       None, self.w, "I")
        base = combine(paint, zero, None, self.w, "I")
        only1 = combine(paint, c1, None, self.w, "I")
        only2 = combine(paint, c2, None, self.w, "I")
        assert np.allclose(both.values, only1.values + only2.values - base.values)

    def test_clamped_at_zero(self):
        zero = const_field(0.0, self.roi, self.shape)
        prompt = const_field(1.0, self.roi, self.shape)
        out = combine(zero, zero, prompt, self.w, "O")
        assert (out.values >= 0).all()
        assert (out.roi_values() == 0).all()

    def test_roi_mismatch(self):
        a = const_field(1.0, full_rect(6, 6), (6, 6))
        b = const_field(1.0, Rect(0, 0, 3, 3), (6, 6))
        with pytest.raises(DimensionMismatch):
            combine(a, b, None, self.w, "I")
