"""Image/mask value types, morphology, bounding-box geometry and IoU.

Conventions used throughout the package:

- images are ``(H, W, 3)`` float arrays with channel values in [0, 1]
- masks are ``(H, W)`` bool arrays, ``True`` = foreground
- soft masks are ``(H, W)`` float arrays in [0, 1]
- the structuring element for dilation/erosion is the Chebyshev square
  (side ``2 * radius + 1``); pixels beyond the image border count as
  background for both operations
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.ndimage import maximum_filter, minimum_filter

from .errors import AmcpError, DimensionMismatch, EmptyMask


# ----------------------------------------------------------------------------
# validation helpers
# ----------------------------------------------------------------------------


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate an RGB image array and return it as float64."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise AmcpError(f"image must have shape (H, W, 3), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise AmcpError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise AmcpError("image channel values must lie in [0, 1]")
    return arr


def check_mask(mask: np.ndarray) -> np.ndarray:
    """Validate a binary mask array and return it as bool."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise AmcpError(f"mask must have shape (H, W), got {arr.shape}")
    if arr.dtype != np.bool_:
        vals = np.unique(arr)
        if not np.isin(vals, (0, 1)).all():
            raise AmcpError("mask values must be strictly binary")
        arr = arr.astype(bool)
    return arr


def check_soft_mask(values: np.ndarray) -> np.ndarray:
    """Validate a soft mask (per-pixel real in [0, 1]) and return it as float64."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise AmcpError(f"soft mask must have shape (H, W), got {arr.shape}")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise AmcpError("soft mask values must lie in [0, 1]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"shape mismatch: {a.shape[:2]} vs {b.shape[:2]}")


def check_kernel(size: int) -> int:
    """Validate a square structuring-element size (odd, >= 1)."""
    size = int(size)
    if size < 1 or size % 2 == 0:
        raise AmcpError(f"kernel size must be odd and >= 1, got {size}")
    return size


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Snap channel values to the 8-bit lattice k/255.

    Painters quantize everything they synthesize so that local backends and
    the PNG wire protocol agree bit-exactly.
    """
    return np.round(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


# ----------------------------------------------------------------------------
# rectangles
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, inclusive-exclusive bounds."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise AmcpError(f"degenerate rect {self}")
        if self.x0 < 0 or self.y0 < 0:
            raise AmcpError(f"negative rect origin {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def contains(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def mask(self, height: int, width: int) -> np.ndarray:
        m = np.zeros((height, width), dtype=bool)
        m[self.slices] = True
        return m


def full_rect(height: int, width: int) -> Rect:
    return Rect(0, 0, width, height)


def union_rect(a: Rect, b: Rect) -> Rect:
    return Rect(min(a.x0, b.x0), min(a.y0, b.y0),
                max(a.x1, b.x1), max(a.y1, b.y1))


def scale_rect(rect: Rect, rate: float, height: int, width: int) -> Rect:
    """Scale a rect about its center by ``rate``, rounding outward, then clamp.

    Rounding is floor/ceil away from the center so that rate 1.0 returns the
    input box and the result is monotone in ``rate``.
    """
    cx, cy = rect.center
    hx = rect.width / 2.0 * rate
    hy = rect.height / 2.0 * rate
    x0 = max(0, int(math.floor(cx - hx)))
    y0 = max(0, int(math.floor(cy - hy)))
    x1 = min(width, int(math.ceil(cx + hx)))
    y1 = min(height, int(math.ceil(cy + hy)))
    return Rect(x0, y0, x1, y1)


def bbox_of(mask: np.ndarray, rate: float = 1.0) -> Rect:
    """Bounding box of the set pixels, scaled about its center and clamped."""
    mask = check_mask(mask)
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyMask("bbox_of on an empty mask")
    h, w = mask.shape
    tight = Rect(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    if rate == 1.0:
        return tight
    return scale_rect(tight, rate, h, w)


# ----------------------------------------------------------------------------
# morphology
# ----------------------------------------------------------------------------


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev dilation: a pixel is set iff any pixel within ``radius`` is set."""
    mask = check_mask(mask)
    if radius < 1:
        raise AmcpError(f"radius must be >= 1, got {radius}")
    return maximum_filter(mask, size=2 * radius + 1, mode="constant", cval=False)


def erode(mask: np.ndarray, radius: int, border: bool = False) -> np.ndarray:
    """Chebyshev erosion; ``border`` sets the value assumed beyond the frame.

    The default (background border) is the dual of :func:`dilate` under
    complement-on-an-extended-canvas.
    """
    mask = check_mask(mask)
    if radius < 1:
        raise AmcpError(f"radius must be >= 1, got {radius}")
    return minimum_filter(mask, size=2 * radius + 1, mode="constant", cval=border)


def rings(mask: np.ndarray, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Inner and outer boundary rings of ``mask``.

    inner = mask minus its erosion, outer = dilation minus the mask; the two
    are disjoint, inner lies inside the mask and outer outside it.
    """
    mask = check_mask(mask)
    if not mask.any():
        empty = np.zeros_like(mask)
        return empty, empty.copy()
    inner = mask & ~erode(mask, width)
    outer = dilate(mask, width) & ~mask
    return inner, outer


def morph_clean(mask: np.ndarray, kernel: int) -> np.ndarray:
    """Remove specks and fill holes smaller than the kernel.

    Closing runs first (dilate, then erode with a foreground border so an
    object touching the frame is not eaten), opening second. Running the
    opening first would let a single interior hole punch out a whole
    kernel-scale neighbourhood.
    """
    kernel = check_kernel(kernel)
    mask = check_mask(mask)
    r = kernel // 2
    if r < 1:
        return mask.copy()
    closed = erode(dilate(mask, r), r, border=True)
    return dilate(erode(closed, r), r)


# ----------------------------------------------------------------------------
# metrics
# ----------------------------------------------------------------------------


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union; two empty masks agree vacuously (1.0)."""
    pred = check_mask(pred)
    gt = check_mask(gt)
    check_same_shape(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    inter = np.count_nonzero(pred & gt)
    return inter / union


# ----------------------------------------------------------------------------
# PNG I/O
# ----------------------------------------------------------------------------
# images: 8-bit RGB; masks: 8-bit grayscale, 0 = background / 255 = foreground


def load_image_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "RGB":
        raise AmcpError(f"{path}: expected an 8-bit RGB PNG, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_image_png(image: np.ndarray, path) -> None:
    arr = np.round(check_image(image) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_mask_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        raise AmcpError(f"{path}: expected an 8-bit grayscale PNG, got mode {img.mode!r}")
    arr = np.asarray(img)
    if not np.isin(np.unique(arr), (0, 255)).all():
        raise AmcpError(f"{path}: mask values must be 0 or 255")
    return arr == 255


def save_mask_png(mask: np.ndarray, path) -> None:
    arr = check_mask(mask).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def save_soft_mask_png(values: np.ndarray, path) -> None:
    arr = np.round(check_soft_mask(values) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")
