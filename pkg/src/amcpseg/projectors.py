"""Feature projection backends: image -> (H, W, C) feature map.

The paint contrast only needs a deterministic, boundary-sensitive embedding
at full resolution. Local backends are the identity (raw RGB) and local
patch statistics; the remote client wraps a feature server returning a
strided grid which is bilinearly upsampled per pixel.
"""
from __future__ import annotations

import base64

import numpy as np
from scipy.ndimage import map_coordinates, uniform_filter

from .core import check_image
from .errors import AmcpError, ProtocolError
from .painters import (DEFAULT_TIMEOUT_S, crop_from_canvas, encode_image_b64,
                       pad_to_canvas, post_json)


def check_feature_map(feat: np.ndarray, image: np.ndarray | None = None) -> np.ndarray:
    arr = np.asarray(feat, dtype=np.float64)
    if arr.ndim != 3:
        raise AmcpError(f"feature map must be (H, W, C), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise AmcpError("feature map contains non-finite values")
    if image is not None and arr.shape[:2] != image.shape[:2]:
        raise AmcpError("feature map does not match the source image size")
    return arr


class Projector:
    """Interface: deterministic full-resolution feature map of an image."""

    def project(self, image: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityProjector(Projector):
    """Features are the RGB channels themselves (the reference path)."""

    def project(self, image: np.ndarray) -> np.ndarray:
        return check_image(image).copy()


class PatchStatsProjector(Projector):
    """Local mean and standard deviation per channel over a square window.

    The window for pixel (y, x) spans rows [y - w//2, y + w - w//2 - 1]
    (likewise columns) with edge replication; 6 channels for RGB input.
    """

    def __init__(self, window: int = 8):
        if window < 2:
            raise AmcpError("window must be >= 2")
        self.window = window

    def project(self, image: np.ndarray) -> np.ndarray:
        image = check_image(image)
        h, w, _ = image.shape
        feats = np.empty((h, w, 6), dtype=np.float64)
        for c in range(3):
            mean = uniform_filter(image[:, :, c], size=self.window, mode="nearest")
            sq = uniform_filter(image[:, :, c] ** 2, size=self.window, mode="nearest")
            feats[:, :, c] = mean
            feats[:, :, 3 + c] = np.sqrt(np.clip(sq - mean ** 2, 0.0, None))
        return feats


def upsample_grid(grid: np.ndarray, stride: int, height: int, width: int) -> np.ndarray:
    """Bilinearly upsample a strided feature grid to per-pixel resolution.

    Grid cell (gy, gx) sits at the patch center
    (gy * stride + (stride - 1) / 2, gx * stride + (stride - 1) / 2);
    pixel positions are clamped to the grid hull.
    """
    gh, gw, ch = grid.shape
    ys = (np.arange(height) - (stride - 1) / 2.0) / stride
    xs = (np.arange(width) - (stride - 1) / 2.0) / stride
    ys = np.clip(ys, 0, gh - 1)
    xs = np.clip(xs, 0, gw - 1)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((height, width, ch), dtype=np.float64)
    for c in range(ch):
        out[:, :, c] = map_coordinates(grid[:, :, c], [gy, gx], order=1,
                                       mode="nearest")
    return out


class RemoteProjector(Projector):
    """Client for a feature server; pads like the painter client, upsamples
    the returned strided grid bilinearly, then crops to native size."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.timeout = timeout

    def project(self, image: np.ndarray) -> np.ndarray:
        image = check_image(image)
        canvas, pad = pad_to_canvas(image)
        payload = {"image": encode_image_b64(canvas), "pad": pad}
        doc = post_json(self.endpoint, "/v1/project", payload, self.timeout)
        try:
            stride = int(doc["stride"])
            channels = int(doc["channels"])
            raw = base64.b64decode(doc["data"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed projection response: {exc}") from exc
        size = canvas.shape[0]
        if stride < 1 or size % stride != 0:
            raise ProtocolError(f"stride {stride} does not divide the {size}px canvas")
        gh = gw = size // stride
        expected = channels * gh * gw * 4
        if len(raw) != expected:
            raise ProtocolError(
                f"feature payload is {len(raw)} bytes, expected {expected}")
        grid = np.frombuffer(raw, dtype="<f4").reshape(channels, gh, gw)
        grid = np.ascontiguousarray(grid.transpose(1, 2, 0)).astype(np.float64)
        full = upsample_grid(grid, stride, size, size)
        return crop_from_canvas(full, pad)


def make_projector(selector: str, timeout: float = DEFAULT_TIMEOUT_S) -> Projector:
    """Build a projector from a CLI-style selector string."""
    if selector == "identity":
        return IdentityProjector()
    if selector == "patchstats":
        return PatchStatsProjector()
    if selector.startswith("remote:"):
        return RemoteProjector(selector.split(":", 1)[1], timeout=timeout)
    raise AmcpError(f"unknown projector selector {selector!r}")
