"""Procedural test scenes: seeded value-noise textures composited through a
ground-truth object mask.

A scene fixes a foreground texture, a background texture and a GT mask, so
idealized painting behaviour is exactly checkable: the recorded
``texture_gap`` is the smallest per-pixel color distance any contrast test
has to work with.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import check_mask, load_mask_png, quantize_image, save_mask_png
from .errors import AmcpError

# hallucinated-background channel shift used by the oracle painter's
# outpainting branch; must exceed twice the texture amplitude so the
# hallucination never coincides with the true background
HALLUC_SHIFT = 0.30


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(height: int, width: int, scale: float, seed: int) -> np.ndarray:
    """Smooth 2-D value noise in [-1, 1], deterministic for (shape, scale, seed)."""
    rng = np.random.default_rng(seed)
    scale = max(float(scale), 1.0)
    gh = int(np.ceil(height / scale)) + 2
    gw = int(np.ceil(width / scale)) + 2
    grid = rng.random((gh, gw))

    y = np.arange(height) / scale
    x = np.arange(width) / scale
    yi = np.floor(y).astype(int)
    xi = np.floor(x).astype(int)
    fy = _fade((y - yi))[:, None]
    fx = _fade((x - xi))[None, :]

    v00 = grid[np.ix_(yi, xi)]
    v01 = grid[np.ix_(yi, xi + 1)]
    v10 = grid[np.ix_(yi + 1, xi)]
    v11 = grid[np.ix_(yi + 1, xi + 1)]
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return 2.0 * (top + fy * (bot - top)) - 1.0


@dataclass(frozen=True)
class TextureSpec:
    """Seeded multi-octave value-noise texture around a base color."""

    base: tuple[float, float, float]
    amplitude: float = 0.05
    scale: float = 12.0
    octaves: int = 3
    seed: int = 0

    def render(self, height: int, width: int) -> np.ndarray:
        out = np.empty((height, width, 3), dtype=np.float64)
        for c in range(3):
            total = np.zeros((height, width))
            amp_sum = 0.0
            amp, scl = 1.0, self.scale
            for o in range(self.octaves):
                total += amp * value_noise(height, width, scl,
                                           self.seed * 7919 + c * 131 + o)
                amp_sum += amp
                amp *= 0.5
                scl = max(scl / 2.0, 1.0)
            out[:, :, c] = self.base[c] + self.amplitude * total / amp_sum
        return quantize_image(out)

    def to_dict(self) -> dict:
        return {"base": list(self.base), "amplitude": self.amplitude,
                "scale": self.scale, "octaves": self.octaves, "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "TextureSpec":
        return TextureSpec(tuple(d["base"]), d["amplitude"], d["scale"],
                           d["octaves"], d["seed"])


@dataclass
class SceneSpec:
    """Everything needed to re-render a synthetic scene and its paintings."""

    width: int
    height: int
    fg_texture: TextureSpec
    bg_texture: TextureSpec
    gt_mask: np.ndarray
    noise_sigma: float = 0.0
    seed: int = 0
    texture_gap: float = field(default=0.0)

    def __post_init__(self):
        self.gt_mask = check_mask(self.gt_mask)
        if self.gt_mask.shape != (self.height, self.width):
            raise AmcpError("gt mask dimensions disagree with the scene")
        if not self.gt_mask.any():
            raise AmcpError("scene ground truth must be non-empty")
        if self.texture_gap == 0.0:
            self.texture_gap = self.compute_texture_gap()

    def render_fg(self) -> np.ndarray:
        return self.fg_texture.render(self.height, self.width)

    def render_bg(self) -> np.ndarray:
        return self.bg_texture.render(self.height, self.width)

    def render_image(self) -> np.ndarray:
        """Compose the scene: foreground texture on GT, background elsewhere."""
        img = self.render_bg()
        img[self.gt_mask] = self.render_fg()[self.gt_mask]
        return img

    def render_halluc_bg(self, seed: int) -> np.ndarray:
        """A background the painter would invent when none of the real one is
        visible: re-seeded background-style noise shifted off the true band."""
        spec = TextureSpec(self.bg_texture.base, self.bg_texture.amplitude,
                           self.bg_texture.scale, self.bg_texture.octaves,
                           seed=self.seed * 1_000_003 + seed)
        return quantize_image(spec.render(self.height, self.width) + HALLUC_SHIFT)

    def compute_texture_gap(self) -> float:
        """Smallest per-pixel color distance separating painted from original
        content: min over the fg/bg gap and the hallucination/bg floor."""
        fg = self.render_fg()
        bg = self.render_bg()
        fg_bg = float(np.sqrt(((fg - bg) ** 2).sum(axis=2)).min())
        halluc_floor = np.sqrt(3.0) * (HALLUC_SHIFT - 2.0 * self.bg_texture.amplitude)
        return min(fg_bg, float(halluc_floor))

    # -- serialization (GT mask stored as a sibling PNG) --

    def save(self, path: Path | str, gt_path: Path | str | None = None) -> None:
        path = Path(path)
        if gt_path is None:
            gt_path = path.parent / (path.name.split(".")[0] + "_gt.png")
        save_mask_png(self.gt_mask, gt_path)
        doc = {
            "width": self.width,
            "height": self.height,
            "fg_texture": self.fg_texture.to_dict(),
            "bg_texture": self.bg_texture.to_dict(),
            "gt_mask": str(Path(gt_path).name),
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "texture_gap": self.texture_gap,
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)

    @staticmethod
    def load(path: Path | str) -> "SceneSpec":
        path = Path(path)
        with open(path) as f:
            doc = json.load(f)
        gt = load_mask_png(path.parent / doc["gt_mask"])
        return SceneSpec(
            width=doc["width"],
            height=doc["height"],
            fg_texture=TextureSpec.from_dict(doc["fg_texture"]),
            bg_texture=TextureSpec.from_dict(doc["bg_texture"]),
            gt_mask=gt,
            noise_sigma=doc["noise_sigma"],
            seed=doc["seed"],
            texture_gap=doc["texture_gap"],
        )
