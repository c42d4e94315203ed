"""Generative painting backends behind one keep-mask interface.

Whether a request is "inpainting" or "outpainting" is determined entirely
by which side of the image is kept as condition; every backend fills the
non-kept pixels and must return the kept pixels bit-exactly. Painted pixels
are quantized to the 8-bit lattice so local backends agree byte-for-byte
with the PNG wire protocol.
"""
from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from .core import check_image, check_mask, check_same_shape, iou, quantize_image
from .errors import (AmcpError, BackendUnavailable, ProtocolError,
                     SceneMismatch, Timeout)
from .scenes import SceneSpec

PAD_SIZE = 512
DEFAULT_TIMEOUT_S = 120.0


@dataclass
class PaintRequest:
    """One painting job: fill everything outside ``keep_mask``.

    ``n_samples`` independent samples are drawn from seeds
    ``seed, seed + 1, ...``.
    """

    image: np.ndarray
    keep_mask: np.ndarray
    n_samples: int = 1
    seed: int = 0
    diffusion_steps: int = 50

    def __post_init__(self):
        self.image = check_image(self.image)
        self.keep_mask = check_mask(self.keep_mask)
        check_same_shape(self.image, self.keep_mask)
        if self.n_samples < 1:
            raise AmcpError("n_samples must be >= 1")


@dataclass
class PaintResult:
    samples: list[np.ndarray]


class Painter:
    """Interface: produce ``n_samples`` paintings of the non-kept region."""

    def paint(self, req: PaintRequest) -> PaintResult:
        raise NotImplementedError


def _restore_kept(samples: list[np.ndarray], req: PaintRequest) -> PaintResult:
    """Force bit-exact kept pixels and the quantization contract."""
    out = []
    for s in samples:
        s = quantize_image(s)
        s[req.keep_mask] = req.image[req.keep_mask]
        out.append(s)
    return PaintResult(out)


class MeanFillPainter(Painter):
    """Baseline: painted pixels take the mean color of the kept pixels."""

    def paint(self, req: PaintRequest) -> PaintResult:
        if req.keep_mask.all():
            return PaintResult([req.image.copy() for _ in range(req.n_samples)])
        if req.keep_mask.any():
            fill = req.image[req.keep_mask].mean(axis=0)
        else:
            fill = np.full(3, 0.5)
        painted = req.image.copy()
        painted[~req.keep_mask] = fill
        return _restore_kept([painted.copy() for _ in range(req.n_samples)], req)


class OraclePainter(Painter):
    """Idealized painter for synthetic scenes.

    It decides which consistency to exploit by comparing the kept region
    with the scene's ground truth: when the kept pixels look like a
    background estimate (ties included, e.g. an empty keep), filled pixels
    complete the background texture; when they look like a foreground
    estimate, filled GT pixels continue the object and the rest becomes a
    hallucinated background that provably differs from the original one.
    Gaussian pixel noise of the scene's sigma is added to painted pixels.
    """

    def __init__(self, scene: SceneSpec):
        self.scene = scene
        self._fg = scene.render_fg()
        self._bg = scene.render_bg()

    def _is_inpaint(self, keep: np.ndarray) -> bool:
        gt = self.scene.gt_mask
        return iou(keep, ~gt) >= iou(keep, gt)

    def paint(self, req: PaintRequest) -> PaintResult:
        if req.image.shape[:2] != (self.scene.height, self.scene.width):
            raise SceneMismatch(
                f"request is {req.image.shape[:2]}, scene is "
                f"{(self.scene.height, self.scene.width)}")
        region = ~req.keep_mask
        if not region.any():
            return PaintResult([req.image.copy() for _ in range(req.n_samples)])

        inpaint = self._is_inpaint(req.keep_mask)
        gt = self.scene.gt_mask
        samples = []
        for i in range(req.n_samples):
            sample_seed = req.seed + i
            painted = req.image.copy()
            if inpaint:
                painted[region] = self._bg[region]
            else:
                fg_part = region & gt
                bg_part = region & ~gt
                painted[fg_part] = self._fg[fg_part]
                if bg_part.any():
                    halluc = self.scene.render_halluc_bg(sample_seed)
                    painted[bg_part] = halluc[bg_part]
            if self.scene.noise_sigma > 0:
                rng = np.random.default_rng(sample_seed)
                noise = rng.normal(0.0, self.scene.noise_sigma, req.image.shape)
                painted[region] += noise[region]
            samples.append(np.clip(painted, 0.0, 1.0))
        return _restore_kept(samples, req)


# ----------------------------------------------------------------------------
# wire protocol helpers (shared with the projector client)
# ----------------------------------------------------------------------------


def encode_image_b64(image: np.ndarray) -> str:
    arr = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_mask_b64(mask: np.ndarray) -> str:
    arr = np.asarray(mask, dtype=bool).astype(np.uint8) * 255
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image_b64(data: str) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(data)))
    except Exception as exc:
        raise ProtocolError(f"undecodable image payload: {exc}") from exc
    if img.mode != "RGB":
        raise ProtocolError(f"expected RGB payload, got {img.mode!r}")
    return np.asarray(img, dtype=np.float64) / 255.0


def pad_to_canvas(image: np.ndarray, keep_mask: np.ndarray | None = None,
                  size: int = PAD_SIZE):
    """Zero-pad to ``size`` x ``size``; the pad area counts as not kept."""
    h, w = image.shape[:2]
    if h > size or w > size:
        raise ProtocolError(f"image {w}x{h} exceeds the {size}x{size} protocol canvas")
    canvas = np.zeros((size, size, 3), dtype=np.float64)
    canvas[:h, :w] = image
    pad = {"left": 0, "top": 0, "orig_w": w, "orig_h": h}
    if keep_mask is None:
        return canvas, pad
    kcanvas = np.zeros((size, size), dtype=bool)
    kcanvas[:h, :w] = keep_mask
    return canvas, kcanvas, pad


def crop_from_canvas(arr: np.ndarray, pad: dict) -> np.ndarray:
    t, l = pad["top"], pad["left"]
    return arr[t:t + pad["orig_h"], l:l + pad["orig_w"]]


def post_json(endpoint: str, path: str, payload: dict, timeout: float) -> dict:
    url = endpoint.rstrip("/") + path
    try:
        resp = requests.post(url, json=payload, timeout=timeout)
    except requests.Timeout as exc:
        raise Timeout(f"{url} timed out after {timeout}s") from exc
    except requests.RequestException as exc:
        raise BackendUnavailable(f"{url} unreachable: {exc}") from exc
    if resp.status_code == 503:
        raise BackendUnavailable(f"{url}: model unavailable (503)")
    if resp.status_code != 200:
        raise ProtocolError(f"{url}: HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"{url}: non-JSON response") from exc


class RemotePainter(Painter):
    """Client for a painting service speaking the base64-PNG protocol.

    The image and keep mask are zero-padded to 512x512 (pad offsets travel
    with the request), responses are cropped back and the kept pixels are
    restored bit-exactly.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT_S):
        self.endpoint = endpoint
        self.timeout = timeout

    def paint(self, req: PaintRequest) -> PaintResult:
        canvas, keep_canvas, pad = pad_to_canvas(req.image, req.keep_mask)
        payload = {
            "image": encode_image_b64(canvas),
            "keep_mask": encode_mask_b64(keep_canvas),
            "n_samples": req.n_samples,
            "seed": req.seed,
            "diffusion_steps": req.diffusion_steps,
            "pad": pad,
        }
        doc = post_json(self.endpoint, "/v1/paint", payload, self.timeout)
        samples = doc.get("samples")
        if not isinstance(samples, list) or len(samples) != req.n_samples:
            raise ProtocolError(
                f"expected {req.n_samples} samples, got {type(samples).__name__} "
                f"of length {len(samples) if isinstance(samples, list) else 'n/a'}")
        out = []
        for blob in samples:
            arr = decode_image_b64(blob)
            if arr.shape[:2] != canvas.shape[:2]:
                raise ProtocolError(
                    f"sample has shape {arr.shape[:2]}, expected {canvas.shape[:2]}")
            out.append(crop_from_canvas(arr, pad))
        return _restore_kept(out, req)


def make_painter(selector: str, scene: SceneSpec | None = None,
                 timeout: float = DEFAULT_TIMEOUT_S) -> Painter:
    """Build a painter from a CLI-style selector string."""
    if selector == "meanfill":
        return MeanFillPainter()
    if selector == "oracle":
        if scene is None:
            raise AmcpError("the oracle painter needs a scene spec")
        return OraclePainter(scene)
    if selector.startswith("remote:"):
        return RemotePainter(selector.split(":", 1)[1], timeout=timeout)
    raise AmcpError(f"unknown painter selector {selector!r}")
