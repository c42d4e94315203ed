"""Contrastive potential: painted-feature distance, color likelihood,
prompt prior, and their weighted combination.

All three terms live on a ``ContrastField``: a full-frame scalar raster
whose values are meaningful (and non-zero) only inside a box roi.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import GaussianMixture

from .core import Rect, check_mask, check_image, check_same_shape
from .errors import AmcpError, DimensionMismatch, NoPromptPoints

GMM_MAX_ITER = 20
GMM_VAR_FLOOR = 1e-4


@dataclass
class ContrastField:
    """Scalar per-pixel field, zero outside ``roi``."""

    values: np.ndarray
    roi: Rect

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise AmcpError(f"field values must be (H, W), got {v.shape}")
        if not np.isfinite(v).all():
            raise AmcpError("field contains non-finite values")
        self.values = v

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def roi_values(self) -> np.ndarray:
        ys, xs = self.roi.slices
        return self.values[ys, xs]


@dataclass(frozen=True)
class PotentialWeights:
    """Term weights; the prompt weight flips sign between I- and O-steps."""

    lambda_paint: float = 0.8
    lambda_color: float = 0.2
    lambda_prompt_istep: float = 0.2
    lambda_prompt_ostep: float = -0.2

    def __post_init__(self):
        if self.lambda_paint + self.lambda_color <= 0:
            raise AmcpError("lambda_paint + lambda_color must be positive")

    def lambda_prompt(self, step_kind: str) -> float:
        return self.lambda_prompt_istep if step_kind == "I" else self.lambda_prompt_ostep


@dataclass(frozen=True)
class GaussianSigma:
    """Prompt-prior widths in pixels (a fraction of the current-mask box)."""

    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise AmcpError("sigma must be positive")

    @staticmethod
    def from_box(roi: Rect, fraction: float) -> "GaussianSigma":
        return GaussianSigma(max(roi.width * fraction, 1e-9),
                             max(roi.height * fraction, 1e-9))


def _masked_field(values: np.ndarray, roi: Rect) -> ContrastField:
    out = np.zeros_like(values)
    ys, xs = roi.slices
    out[ys, xs] = values[ys, xs]
    return ContrastField(out, roi)


def phi_paint(orig_feat: np.ndarray, paint_feat: np.ndarray, roi: Rect) -> ContrastField:
    """Per-pixel L2 norm over channels of the feature difference, inside roi."""
    a = np.asarray(orig_feat, dtype=np.float64)
    b = np.asarray(paint_feat, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"feature shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise AmcpError(f"feature maps must be (H, W, C), got {a.shape}")
    dist = np.sqrt(((a - b) ** 2).sum(axis=2))
    return _masked_field(dist, roi)


def _fit_color_model(pixels: np.ndarray, n_components: int, seed: int) -> GaussianMixture:
    """Diagonal-covariance mixture; falls back to one component when the
    region is too uniform to support ``n_components``."""
    n = min(n_components, np.unique(pixels, axis=0).shape[0])
    gmm = GaussianMixture(
        n_components=max(n, 1),
        covariance_type="diag",
        max_iter=GMM_MAX_ITER,
        reg_covar=GMM_VAR_FLOOR,
        random_state=seed,
        init_params="kmeans",
    )
    with warnings.catch_warnings():
        # the iteration budget is fixed by design; not converging is fine
        warnings.simplefilter("ignore", ConvergenceWarning)
        gmm.fit(pixels)
    return gmm


def phi_color(image: np.ndarray, mask: np.ndarray, roi: Rect,
              n_components: int = 5, seed: int = 0,
              max_fit_pixels: int = 20000) -> ContrastField:
    """Probability that each roi pixel's color belongs to the foreground model.

    Two color mixture models are fitted: foreground from the masked roi
    pixels, background from the rest of the roi. The field value is
    p_fg / (p_fg + p_bg). Fitting subsamples large regions (seeded) for
    speed; the posterior is still evaluated on every roi pixel.
    """
    image = check_image(image)
    mask = check_mask(mask)
    check_same_shape(image, mask)
    ys, xs = roi.slices
    roi_rgb = image[ys, xs].reshape(-1, 3)
    roi_fg = mask[ys, xs].ravel()

    fg_pixels = roi_rgb[roi_fg]
    bg_pixels = roi_rgb[~roi_fg]
    if fg_pixels.shape[0] == 0 or bg_pixels.shape[0] == 0:
        raise AmcpError("phi_color needs both mask and complement inside roi")

    rng = np.random.default_rng(seed)

    def subsample(px):
        if px.shape[0] > max_fit_pixels:
            idx = rng.choice(px.shape[0], size=max_fit_pixels, replace=False)
            return px[idx]
        return px

    fg_model = _fit_color_model(subsample(fg_pixels), n_components, seed)
    bg_model = _fit_color_model(subsample(bg_pixels), n_components, seed)

    log_fg = fg_model.score_samples(roi_rgb)
    log_bg = bg_model.score_samples(roi_rgb)
    # p_fg / (p_fg + p_bg) computed stably in log space
    post = 1.0 / (1.0 + np.exp(np.clip(log_bg - log_fg, -500, 500)))

    out = np.zeros(image.shape[:2], dtype=np.float64)
    out[ys, xs] = post.reshape(roi.height, roi.width)
    return ContrastField(out, roi)


def phi_prompt(prompt_points, sigma: GaussianSigma, roi: Rect,
               shape: tuple[int, int]) -> ContrastField:
    """Max over prompt points of a decaying Gaussian bump (value 1 at a point).

    field[y, x] = max_l exp(-((x - x_l)^2 / sx^2 + (y - y_l)^2 / sy^2))
    """
    points = list(prompt_points)
    if not points:
        raise NoPromptPoints("prompt prior needs at least one point")
    h, w = shape
    ys, xs = roi.slices
    gy, gx = np.mgrid[ys, xs]
    best = np.zeros((roi.height, roi.width), dtype=np.float64)
    for (px, py) in points:
        q = ((gx - px) / sigma.sigma_x) ** 2 + ((gy - py) / sigma.sigma_y) ** 2
        np.maximum(best, np.exp(-q), out=best)
    out = np.zeros((h, w), dtype=np.float64)
    out[ys, xs] = best
    return ContrastField(out, roi)


def combine(paint: ContrastField, color: ContrastField,
            prompt: ContrastField | None, w: PotentialWeights,
            step_kind: str) -> ContrastField:
    """Weighted sum of the three terms.

    The paint term is first normalized to [0, 1] by its roi max (guarded
    when flat zero) so the weights are portable across projectors. The
    prompt term enters with a step-dependent sign and is omitted for
    coarse-mask prompts. The result is clamped at zero, which cannot change
    which pixels fall in the bottom cluster.
    """
    if step_kind not in ("I", "O"):
        raise AmcpError(f"step_kind must be 'I' or 'O', got {step_kind!r}")
    if paint.shape != color.shape or paint.roi != color.roi:
        raise DimensionMismatch("paint/color fields disagree on shape or roi")
    if prompt is not None and (prompt.shape != paint.shape or prompt.roi != paint.roi):
        raise DimensionMismatch("prompt field disagrees on shape or roi")

    peak = paint.roi_values().max()
    paint_norm = paint.values / peak if peak > 0 else paint.values
    total = w.lambda_paint * paint_norm + w.lambda_color * color.values
    if prompt is not None:
        total = total + w.lambda_prompt(step_kind) * prompt.values
    np.maximum(total, 0.0, out=total)
    return _masked_field(total, paint.roi)
