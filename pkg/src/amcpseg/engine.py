"""The alternating inpaint/outpaint refinement loop.

State is a canonical foreground mask. Each I-step may only cut pixels
inside the inner boundary ring of the current mask; each O-step may only
add pixels inside the outer ring. Evidence comes from clustering the
contrastive potential of painted-vs-original images inside a box around
the current mask; per-sample candidate masks are majority-averaged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .clustering import kmeans_binarize
from .core import (Rect, bbox_of, check_image, check_mask, check_same_shape,
                   full_rect, morph_clean, rings, save_mask_png,
                   save_soft_mask_png, save_image_png, union_rect)
from .errors import AmcpError, InvalidMask, PromptOutOfBounds
from .painters import PaintRequest, Painter
from .potential import (ContrastField, GaussianSigma, PotentialWeights,
                        combine, phi_color, phi_paint, phi_prompt)
from .projectors import Projector, check_feature_map

# keeps per-step painter seed ranges disjoint for any reasonable sample count
STEP_SEED_STRIDE = 1009


# ----------------------------------------------------------------------------
# prompts
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PointPrompt:
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise AmcpError("point prompt needs at least one point")


@dataclass(frozen=True)
class BoxPrompt:
    box: Rect


@dataclass
class ScribblePrompt:
    mask: np.ndarray

    def __post_init__(self):
        self.mask = check_mask(self.mask)
        if not self.mask.any():
            raise InvalidMask("scribble prompt is empty")


@dataclass
class CoarseMaskPrompt:
    mask: np.ndarray

    def __post_init__(self):
        self.mask = check_mask(self.mask)
        if not self.mask.any():
            raise InvalidMask("coarse mask prompt is empty")


Prompt = PointPrompt | BoxPrompt | ScribblePrompt | CoarseMaskPrompt


def prompt_kind(prompt: Prompt) -> str:
    return {PointPrompt: "point", BoxPrompt: "box",
            ScribblePrompt: "scribble", CoarseMaskPrompt: "mask"}[type(prompt)]


def prompt_points(prompt: Prompt) -> list[tuple[float, float]] | None:
    """Points feeding the Gaussian prompt prior; None for coarse masks."""
    if isinstance(prompt, PointPrompt):
        return list(prompt.points)
    if isinstance(prompt, BoxPrompt):
        return [prompt.box.center]
    if isinstance(prompt, ScribblePrompt):
        ys, xs = np.nonzero(prompt.mask)
        return [(float(x), float(y)) for x, y in zip(xs, ys)]
    return None


def init_mask(prompt: Prompt, shape: tuple[int, int]) -> np.ndarray:
    """Initial foreground mask: the prompt itself for boxes and coarse masks,
    the whole frame for points and scribbles (the first inpainting step then
    paints everything and the color/prompt terms localize)."""
    h, w = shape
    if isinstance(prompt, BoxPrompt):
        b = prompt.box
        if b.x1 > w or b.y1 > h:
            raise PromptOutOfBounds(f"box {b} exceeds {w}x{h}")
        return b.mask(h, w)
    if isinstance(prompt, CoarseMaskPrompt):
        if prompt.mask.shape != shape:
            raise PromptOutOfBounds("coarse mask dimensions disagree with the image")
        return prompt.mask.copy()
    if isinstance(prompt, ScribblePrompt):
        if prompt.mask.shape != shape:
            raise PromptOutOfBounds("scribble dimensions disagree with the image")
        return np.ones(shape, dtype=bool)
    for (x, y) in prompt.points:
        if not (0 <= x < w and 0 <= y < h):
            raise PromptOutOfBounds(f"point ({x}, {y}) outside {w}x{h}")
    return np.ones(shape, dtype=bool)


# ----------------------------------------------------------------------------
# configuration and traces
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AmcpConfig:
    """All loop hyperparameters; defaults follow the reference operating point."""

    steps: int = 5
    first_step: str = "I"   # only an inpaint-first schedule is defined
    n_samples: int = 5
    k_schedule: tuple[int, ...] | None = None
    weights: PotentialWeights = field(default_factory=PotentialWeights)
    ring_width: int = 32
    clean_kernel: int = 5
    box_rate: float = 1.1
    sigma_fraction: float = 0.1
    avg_threshold: float = 0.5
    color_components: int = 5
    diffusion_steps: int = 50
    seed: int = 0
    record_objective: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise AmcpError("steps must be >= 1")
        if self.first_step != "I":
            raise AmcpError("the loop must start with an I-step")
        if self.n_samples < 1:
            raise AmcpError("n_samples must be >= 1")
        if self.k_schedule is not None and len(self.k_schedule) != self.steps:
            raise AmcpError("k_schedule length must equal steps")
        if not (0.0 < self.avg_threshold < 1.0):
            raise AmcpError("avg_threshold must lie in (0, 1)")

    def step_kind(self, t: int) -> str:
        return "I" if t % 2 == 0 else "O"

    def resolve_k_schedule(self, kind: str) -> tuple[int, ...]:
        """3 centers early then 2 for localizing prompts; always 2 for
        coarse masks (which start close to the answer)."""
        if self.k_schedule is not None:
            return tuple(self.k_schedule)
        if kind == "mask":
            return (2,) * self.steps
        return tuple(3 if t < 3 else 2 for t in range(self.steps))

    def echo(self) -> dict:
        doc = asdict(self)
        doc["k_schedule"] = list(self.k_schedule) if self.k_schedule else None
        return doc


@dataclass
class StepTrace:
    """Everything recorded about one refinement step."""

    index: int
    kind: str
    k: int
    soft_mask: np.ndarray
    pre_clean_mask: np.ndarray
    mask: np.ndarray
    shrink_ok: bool
    grow_ok: bool
    degenerate_cluster: bool
    degenerate_step: bool
    color_fallback: bool
    posterior_score: float
    objective_value: float | None
    roi: Rect
    painter_calls: int
    phi_fields: list[np.ndarray] | None = None
    painted_samples: list[np.ndarray] | None = None

    def summary(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "k": self.k,
            "mask_area": int(self.mask.sum()),
            "pre_clean_area": int(self.pre_clean_mask.sum()),
            "shrink_ok": self.shrink_ok,
            "grow_ok": self.grow_ok,
            "degenerate_cluster": self.degenerate_cluster,
            "degenerate_step": self.degenerate_step,
            "color_fallback": self.color_fallback,
            "posterior_score": self.posterior_score,
            "objective_value": self.objective_value,
            "roi": [self.roi.x0, self.roi.y0, self.roi.x1, self.roi.y1],
            "painter_calls": self.painter_calls,
        }


# ----------------------------------------------------------------------------
# the step
# ----------------------------------------------------------------------------


def _color_field(image, mask, roi, cfg, step_seed) -> tuple[ContrastField, bool]:
    """Color term with a flat fallback when one side of the roi is empty
    (the full-frame initial mask has no complement to model)."""
    ys, xs = roi.slices
    in_roi = mask[ys, xs]
    if in_roi.all() or not in_roi.any():
        flat = np.zeros(mask.shape, dtype=np.float64)
        flat[ys, xs] = 0.5
        return ContrastField(flat, roi), True
    return phi_color(image, mask, roi, n_components=cfg.color_components,
                     seed=step_seed), False


def run_step(image: np.ndarray, mask_t: np.ndarray, kind: str, cfg: AmcpConfig,
             painter: Painter, projector: Projector, prompt: Prompt,
             k: int | None = None, step_index: int = 0,
             orig_feat: np.ndarray | None = None,
             record_fields: bool = False) -> tuple[np.ndarray, StepTrace]:
    """One adversarial refinement step on the canonical foreground mask.

    I-step: paint the current foreground from background context; pixels of
    the inner ring that fall in the bottom contrast cluster are cut.
    O-step: paint the background from foreground context; pixels of the
    outer ring in the bottom cluster (they match the original, so they
    continue the object) are added.
    """
    image = check_image(image)
    mask_t = check_mask(mask_t)
    check_same_shape(image, mask_t)
    if kind not in ("I", "O"):
        raise AmcpError(f"step kind must be 'I' or 'O', got {kind!r}")
    if not mask_t.any():
        raise InvalidMask("step input mask is empty")
    h, w = mask_t.shape

    if k is None:
        k = cfg.resolve_k_schedule(prompt_kind(prompt))[step_index]
    mask_box = full_rect(h, w) if mask_t.all() else bbox_of(mask_t, cfg.box_rate)
    roi = mask_box
    inner, outer = rings(mask_t, cfg.ring_width)
    update_ring = inner if kind == "I" else outer
    if kind == "O" and outer.any():
        # the contrast box must cover every pixel the update rule may add,
        # or the outer ring beyond the cropped box could never carry evidence
        roi = union_rect(roi, bbox_of(outer, 1.0))

    keep = ~mask_t if kind == "I" else mask_t
    step_seed = cfg.seed + STEP_SEED_STRIDE * step_index
    req = PaintRequest(image, keep, n_samples=cfg.n_samples, seed=step_seed,
                       diffusion_steps=cfg.diffusion_steps)
    result = painter.paint(req)

    if orig_feat is None:
        orig_feat = projector.project(image)
    color, color_fallback = _color_field(image, mask_t, roi, cfg, step_seed)
    points = prompt_points(prompt)
    prior = None
    if points is not None:
        # the prior width follows the current mask's box, not the larger
        # contrast roi an O-step may use
        sigma = GaussianSigma.from_box(mask_box, cfg.sigma_fraction)
        prior = phi_prompt(points, sigma, roi, (h, w))

    candidates = np.empty((cfg.n_samples, h, w), dtype=bool)
    phi_sum = np.zeros((h, w), dtype=np.float64)
    degenerate_cluster = False
    kept_fields = [] if record_fields else None
    for i, painted in enumerate(result.samples):
        paint_term = phi_paint(orig_feat, projector.project(painted), roi)
        phi = combine(paint_term, color, prior, cfg.weights, kind)
        clusters = kmeans_binarize(phi, k, seed=step_seed + i)
        degenerate_cluster |= clusters.degenerate
        # only clustered evidence (inside the contrast box) may change a
        # label: the bottom cluster is cut in I-steps and, matching the
        # original against the outpainting, adopted in O-steps
        change = clusters.bottom & update_ring
        if kind == "I":
            candidates[i] = mask_t & ~change
        else:
            candidates[i] = mask_t | change
        phi_sum += phi.values
        if kept_fields is not None:
            kept_fields.append(phi.values.copy())

    soft = candidates.mean(axis=0)
    # majority vote; a dead tie (possible for even sample counts) carries no
    # evidence either way and keeps the pixel's previous label
    pre_clean = (soft > cfg.avg_threshold) | \
                ((soft == cfg.avg_threshold) & mask_t)
    shrink_ok = bool(kind != "I" or not (pre_clean & ~mask_t).any())
    grow_ok = bool(kind != "O" or not (mask_t & ~pre_clean).any())

    final = morph_clean(pre_clean, cfg.clean_kernel)
    degenerate_step = not final.any()
    if degenerate_step:
        final = mask_t.copy()

    phi_mean = phi_sum / cfg.n_samples
    support = final & roi.mask(h, w)
    phi_bar = float(phi_mean[support].mean()) if support.any() else 0.0
    posterior = math.exp(-phi_bar)

    objective_value = None
    if cfg.record_objective and final.any() and not final.all():
        objective_value = objective(image, final, painter, projector,
                                    ring_width=cfg.ring_width,
                                    seed=step_seed + cfg.n_samples,
                                    diffusion_steps=cfg.diffusion_steps,
                                    orig_feat=orig_feat)

    trace = StepTrace(
        index=step_index, kind=kind, k=k, soft_mask=soft,
        pre_clean_mask=pre_clean, mask=final,
        shrink_ok=shrink_ok, grow_ok=grow_ok,
        degenerate_cluster=degenerate_cluster, degenerate_step=degenerate_step,
        color_fallback=color_fallback, posterior_score=posterior,
        objective_value=objective_value, roi=roi,
        painter_calls=cfg.n_samples + (2 if objective_value is not None else 0),
        phi_fields=kept_fields,
        painted_samples=[s.copy() for s in result.samples] if record_fields else None,
    )
    return final, trace


def run(image: np.ndarray, prompt: Prompt, cfg: AmcpConfig, painter: Painter,
        projector: Projector,
        record_fields: bool = False) -> tuple[np.ndarray, list[StepTrace]]:
    """Full loop: prompt -> initial mask, then ``cfg.steps`` alternating
    steps starting with an I-step. Returns the final foreground mask and
    one trace per step."""
    image = check_image(image)
    mask = init_mask(prompt, image.shape[:2])
    schedule = cfg.resolve_k_schedule(prompt_kind(prompt))
    orig_feat = check_feature_map(projector.project(image), image)

    traces: list[StepTrace] = []
    for t in range(cfg.steps):
        mask, trace = run_step(image, mask, cfg.step_kind(t), cfg, painter,
                               projector, prompt, k=schedule[t], step_index=t,
                               orig_feat=orig_feat, record_fields=record_fields)
        traces.append(trace)
    return mask, traces


# ----------------------------------------------------------------------------
# diagnostics and applications
# ----------------------------------------------------------------------------


def objective(image: np.ndarray, mask: np.ndarray, painter: Painter,
              projector: Projector, ring_width: int = 32, seed: int = 0,
              diffusion_steps: int = 50,
              orig_feat: np.ndarray | None = None) -> float:
    """Two-ring painting-contrast score of a mask (diagnostic only).

    Mean per-pixel feature distance between the image and one inpainted
    sample over the inner ring, plus the same against one outpainted sample
    over the outer ring. Larger is better; the loop never optimizes this
    directly.
    """
    image = check_image(image)
    mask = check_mask(mask)
    if not mask.any() or mask.all():
        raise InvalidMask("objective needs a non-empty, non-full mask")
    inner, outer = rings(mask, ring_width)
    if orig_feat is None:
        orig_feat = projector.project(image)

    total = 0.0
    for keep, ring, s in ((~mask, inner, seed), (mask, outer, seed + 1)):
        sample = painter.paint(PaintRequest(image, keep, n_samples=1, seed=s,
                                            diffusion_steps=diffusion_steps)).samples[0]
        feat = projector.project(sample)
        dist = np.sqrt(((orig_feat - feat) ** 2).sum(axis=2))
        if ring.any():
            total += float(dist[ring].mean())
    return total


def erase_object(image: np.ndarray, final_mask: np.ndarray, painter: Painter,
                 seed: int = 0, diffusion_steps: int = 50) -> np.ndarray:
    """Paint the masked object away, keeping the background bit-exactly."""
    image = check_image(image)
    final_mask = check_mask(final_mask)
    check_same_shape(image, final_mask)
    if not final_mask.any():
        raise InvalidMask("erase_object needs a non-empty mask")
    req = PaintRequest(image, ~final_mask, n_samples=1, seed=seed,
                       diffusion_steps=diffusion_steps)
    return painter.paint(req).samples[0]


# ----------------------------------------------------------------------------
# trace dumping
# ----------------------------------------------------------------------------


def dump_trace(directory: Path | str, traces: list[StepTrace], cfg: AmcpConfig,
               extra: dict | None = None) -> Path:
    """Write per-step mask/soft-mask PNGs and a deterministic trace.json.

    trace.json carries only reproducible quantities (objective values,
    flags, call counts, config echo) so identical runs are byte-identical;
    wall-clock timing belongs to evaluation reports.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for tr in traces:
        save_mask_png(tr.mask, directory / f"step_{tr.index}_{tr.kind}.png")
        save_soft_mask_png(tr.soft_mask, directory / f"step_{tr.index}_avg.png")
        if tr.painted_samples:
            for i, s in enumerate(tr.painted_samples):
                save_image_png(s, directory / f"step_{tr.index}_paint_{i}.png")
    doc = {
        "config": cfg.echo(),
        "steps": [tr.summary() for tr in traces],
    }
    if extra:
        doc.update(extra)
    out = directory / "trace.json"
    with open(out, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
    return out
