import numpy as np
import pytest

from amcpseg.evalharness import BG_BASE, FG_BASE, TEXTURE_AMPLITUDE
from amcpseg.scenes import SceneSpec, TextureSpec


def ellipse_mask(height, width, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:height, 0:width]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def make_scene(seed=0, noise_sigma=0.0, height=48, width=48):
    """Small elliptical test scene with the standard texture bands."""
    gt = ellipse_mask(height, width, height / 2, width / 2,
                      height * 0.27, width * 0.33)
    return SceneSpec(
        width=width,
        height=height,
        fg_texture=TextureSpec(base=FG_BASE, amplitude=TEXTURE_AMPLITUDE,
                               seed=seed * 2 + 1),
        bg_texture=TextureSpec(base=BG_BASE, amplitude=TEXTURE_AMPLITUDE,
                               seed=seed * 2 + 2),
        gt_mask=gt,
        noise_sigma=noise_sigma,
        seed=seed,
    )


@pytest.fixture
def scene():
    return make_scene(seed=3)


@pytest.fixture
def noisy_scene():
    return make_scene(seed=3, noise_sigma=0.05)
