"""Training-free prompt-guided object segmentation by adversarial masked
contrastive painting: alternately inpaint/outpaint through a generative
painter, contrast painted images against the original, and refine a mask
with constrained shrink/grow updates until it settles on the object."""

from .core import (Rect, bbox_of, dilate, erode, iou, load_image_png,
                   load_mask_png, morph_clean, rings, save_image_png,
                   save_mask_png)
from .clustering import ClusterResult, kmeans_binarize
from .engine import (AmcpConfig, BoxPrompt, CoarseMaskPrompt, PointPrompt,
                     Prompt, ScribblePrompt, StepTrace, erase_object,
                     init_mask, objective, run, run_step)
from .errors import AmcpError
from .estimator import AmcpSegmenter
from .painters import (MeanFillPainter, OraclePainter, PaintRequest,
                       PaintResult, Painter, RemotePainter, make_painter)
from .potential import (ContrastField, GaussianSigma, PotentialWeights,
                        combine, phi_color, phi_paint, phi_prompt)
from .projectors import (IdentityProjector, PatchStatsProjector, Projector,
                         RemoteProjector, make_projector)
from .scenes import SceneSpec, TextureSpec

__version__ = "0.1.0"

__all__ = [
    "AmcpConfig", "AmcpError", "AmcpSegmenter", "BoxPrompt", "ClusterResult",
    "CoarseMaskPrompt", "ContrastField", "GaussianSigma", "IdentityProjector",
    "MeanFillPainter", "OraclePainter", "PaintRequest", "PaintResult",
    "Painter", "PatchStatsProjector", "PointPrompt", "PotentialWeights",
    "Projector", "Prompt", "Rect", "RemotePainter", "RemoteProjector",
    "SceneSpec", "ScribblePrompt", "StepTrace", "TextureSpec", "bbox_of",
    "combine", "dilate", "erase_object", "erode", "init_mask", "iou",
    "kmeans_binarize", "load_image_png", "load_mask_png", "make_painter",
    "make_projector", "morph_clean", "objective", "phi_color", "phi_paint",
    "phi_prompt", "rings", "run", "run_step", "save_image_png",
    "save_mask_png",
]
