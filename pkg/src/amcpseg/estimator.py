"""Scikit-learn style front door for the segmentation loop.

The algorithm is training-free, so ``fit`` only validates parameters and
binds backends; ``predict`` maps (image, prompt) to a boolean foreground
mask. All hyperparameters are constructor arguments, so ``get_params`` /
``set_params`` and ``clone`` work for sweeps and pipelines.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .engine import AmcpConfig, Prompt, StepTrace, run
from .errors import AmcpError
from .painters import Painter, make_painter
from .potential import PotentialWeights
from .projectors import Projector, make_projector
from .scenes import SceneSpec


class AmcpSegmenter(BaseEstimator):
    """Prompt-guided segmenter driven by contrastive painting.

    Parameters mirror the loop configuration; ``painter`` / ``projector``
    accept either backend instances or selector strings
    (``meanfill`` | ``oracle`` | ``remote:URL`` and
    ``identity`` | ``patchstats`` | ``remote:URL``). The oracle painter
    additionally needs ``scene``.
    """

    def __init__(self, steps=5, n_samples=5, k_schedule=None,
                 lambda_paint=0.8, lambda_color=0.2, lambda_prompt=0.2,
                 ring_width=32, clean_kernel=5, box_rate=1.1,
                 sigma_fraction=0.1, avg_threshold=0.5, color_components=5,
                 diffusion_steps=50, seed=0, record_objective=True,
                 painter="meanfill", projector="patchstats", scene=None):
        self.steps = steps
        self.n_samples = n_samples
        self.k_schedule = k_schedule
        self.lambda_paint = lambda_paint
        self.lambda_color = lambda_color
        self.lambda_prompt = lambda_prompt
        self.ring_width = ring_width
        self.clean_kernel = clean_kernel
        self.box_rate = box_rate
        self.sigma_fraction = sigma_fraction
        self.avg_threshold = avg_threshold
        self.color_components = color_components
        self.diffusion_steps = diffusion_steps
        self.seed = seed
        self.record_objective = record_objective
        self.painter = painter
        self.projector = projector
        self.scene = scene

    # -- plumbing --

    def _config(self) -> AmcpConfig:
        weights = PotentialWeights(
            lambda_paint=self.lambda_paint,
            lambda_color=self.lambda_color,
            lambda_prompt_istep=self.lambda_prompt,
            lambda_prompt_ostep=-self.lambda_prompt,
        )
        schedule = tuple(self.k_schedule) if self.k_schedule is not None else None
        return AmcpConfig(
            steps=self.steps, n_samples=self.n_samples, k_schedule=schedule,
            weights=weights, ring_width=self.ring_width,
            clean_kernel=self.clean_kernel, box_rate=self.box_rate,
            sigma_fraction=self.sigma_fraction, avg_threshold=self.avg_threshold,
            color_components=self.color_components,
            diffusion_steps=self.diffusion_steps, seed=self.seed,
            record_objective=self.record_objective,
        )

    def _resolve_painter(self) -> Painter:
        if isinstance(self.painter, str):
            scene = self.scene
            if isinstance(scene, (str,)):
                scene = SceneSpec.load(scene)
            return make_painter(self.painter, scene=scene)
        if isinstance(self.painter, Painter):
            return self.painter
        raise AmcpError("painter must be a selector string or a Painter")

    def _resolve_projector(self) -> Projector:
        if isinstance(self.projector, str):
            return make_projector(self.projector)
        if isinstance(self.projector, Projector):
            return self.projector
        raise AmcpError("projector must be a selector string or a Projector")

    # -- estimator API --

    def fit(self, X=None, y=None):
        """Validate the configuration and bind backends; no training happens."""
        self.config_ = self._config()
        self.painter_ = self._resolve_painter()
        self.projector_ = self._resolve_projector()
        return self

    def predict(self, image: np.ndarray, prompt: Prompt) -> np.ndarray:
        """Segment one image; returns an (H, W) boolean foreground mask."""
        mask, _ = self.segment(image, prompt)
        return mask

    def segment(self, image: np.ndarray, prompt: Prompt,
                record_fields: bool = False) -> tuple[np.ndarray, list[StepTrace]]:
        """Like :meth:`predict` but also returns the per-step traces."""
        if not hasattr(self, "config_"):
            self.fit()
        return run(image, prompt, self.config_, self.painter_, self.projector_,
                   record_fields=record_fields)
