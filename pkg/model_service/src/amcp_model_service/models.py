"""Model backends for the painting/projection service.

The built-in backends are deterministic and dependency-light so the
service is protocol-conformant out of the box: painting is an iterative
noise-annealed diffusion fill clamped on the kept pixels, projection is
strided patch statistics. Heavier checkpoints plug in through the same
registry; asking for an unknown model id fails at startup so the service
never binds half-loaded.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import uniform_filter


class ModelUnavailable(Exception):
    """Requested model id cannot be served."""


class PaintModel:
    name = "base"

    def paint(self, image: np.ndarray, keep: np.ndarray, n_samples: int,
              seed: int, steps: int) -> list[np.ndarray]:
        """image: (H, W, 3) float in [0, 1]; keep: (H, W) bool.
        Returns n_samples uint8 arrays; kept pixels are re-composited by the
        caller, so backends only need to fill the hole plausibly."""
        raise NotImplementedError


class ProjectModel:
    name = "base"
    stride = 8
    channels = 0

    def project(self, image: np.ndarray) -> np.ndarray:
        """Returns a float32 grid of shape (channels, H/stride, W/stride)."""
        raise NotImplementedError


def _hole_window(hole: np.ndarray, margin: int):
    """Slices covering the hole plus a context margin; None when nothing to
    fill. Iterating on the crop instead of the full canvas keeps the cost
    proportional to the painted region."""
    ys, xs = np.nonzero(hole)
    if ys.size == 0:
        return None
    h, w = hole.shape
    return (slice(max(0, ys.min() - margin), min(h, ys.max() + 1 + margin)),
            slice(max(0, xs.min() - margin), min(w, xs.max() + 1 + margin)))


class DiffusionFillPainter(PaintModel):
    """Seeded noise annealed into a smooth boundary-conditioned fill.

    Each iteration averages the canvas with its neighbourhood while the
    kept pixels stay clamped to the input, so the hole relaxes toward a
    harmonic completion of its surroundings; early iterations keep some of
    the seeded noise, later ones anneal it away. More steps give a cleaner
    fill.
    """

    name = "builtin-diffusion"

    def paint(self, image, keep, n_samples, seed, steps):
        hole = ~keep
        out = []
        window = _hole_window(hole, margin=8)
        for i in range(n_samples):
            rng = np.random.default_rng(seed + i)
            canvas = image.copy()
            if window is not None:
                ys, xs = window
                crop = canvas[ys, xs]
                crop_keep = keep[ys, xs]
                crop_hole = ~crop_keep
                crop[crop_hole] = rng.uniform(0.0, 1.0,
                                              size=(int(crop_hole.sum()), 3))
                for t in range(max(steps, 1)):
                    blurred = uniform_filter(crop, size=(3, 3, 1),
                                             mode="nearest")
                    anneal = (1.0 - (t + 1) / max(steps, 1)) ** 2
                    noise = rng.normal(0.0, 0.08 * anneal, crop.shape)
                    crop[crop_hole] = np.clip(
                        blurred[crop_hole] + noise[crop_hole], 0.0, 1.0)
                    crop[crop_keep] = image[ys, xs][crop_keep]
                canvas[ys, xs] = crop
            out.append(np.round(canvas * 255.0).astype(np.uint8))
        return out


class PatchStatsProjector(ProjectModel):
    """Per-patch mean and standard deviation of each channel at stride 8."""

    name = "builtin-patch"
    stride = 8
    channels = 6

    def project(self, image):
        h, w, _ = image.shape
        gh, gw = h // self.stride, w // self.stride
        patches = image[:gh * self.stride, :gw * self.stride].reshape(
            gh, self.stride, gw, self.stride, 3)
        mean = patches.mean(axis=(1, 3))
        std = patches.std(axis=(1, 3))
        grid = np.concatenate([mean, std], axis=2)          # (gh, gw, 6)
        return np.ascontiguousarray(grid.transpose(2, 0, 1)).astype("<f4")


_PAINTERS = {DiffusionFillPainter.name: DiffusionFillPainter}
_PROJECTORS = {PatchStatsProjector.name: PatchStatsProjector}


def load_painter(name: str) -> PaintModel:
    if name not in _PAINTERS:
        raise ModelUnavailable(
            f"unknown painter model {name!r}; available: {sorted(_PAINTERS)}")
    return _PAINTERS[name]()


def load_projector(name: str) -> ProjectModel:
    if name not in _PROJECTORS:
        raise ModelUnavailable(
            f"unknown projector model {name!r}; available: {sorted(_PROJECTORS)}")
    return _PROJECTORS[name]()
