"""Synthetic suites, prompt-noise robustness sweeps, ablations and reports.

A generated suite is fully reproducible from one seed: every scene records
its own sub-seed, texture gap and GT box in ``scenes.json``. Reports are
deterministic apart from the wall-clock column.
"""
from __future__ import annotations

import csv
import json
import math
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.ndimage import label as cc_label
from skimage.draw import polygon as draw_polygon
from skimage.morphology import skeletonize

from .core import (Rect, bbox_of, check_mask, iou, load_image_png,
                   load_mask_png, morph_clean, save_image_png, save_mask_png)
from .engine import (AmcpConfig, BoxPrompt, CoarseMaskPrompt, PointPrompt,
                     Prompt, ScribblePrompt, dump_trace, prompt_kind, run)
from .errors import AmcpError, ReportWriteError
from .painters import OraclePainter, Painter, make_painter
from .projectors import IdentityProjector, Projector, make_projector
from .scenes import SceneSpec, TextureSpec, value_noise

# canonical texture operating point: close enough bands that sample noise
# creates genuine per-sample ambiguity, far enough apart that the noise-free
# contrast is exact
FG_BASE = (0.48, 0.45, 0.42)
BG_BASE = (0.30, 0.33, 0.36)
TEXTURE_AMPLITUDE = 0.10

AREA_BOUNDS = (0.05, 0.40)
FRAME_MARGIN = 5
MIN_BBOX_SIDE = 16
MAX_BBOX_SIDE = 32
MIN_FILL_RATIO = 0.45
COARSE_ERODE_TARGET = 0.70      # keep ~70 % of the GT area
SCRIBBLE_FRACTION = 0.60

PROMPT_TYPES = ("point", "box", "scribble", "mask")


# ----------------------------------------------------------------------------
# scene generation
# ----------------------------------------------------------------------------


@dataclass
class Scene:
    """One generated suite element with its derived prompts."""

    index: int
    spec: SceneSpec
    image: np.ndarray
    prompts: dict[str, Prompt]

    @property
    def gt_mask(self) -> np.ndarray:
        return self.spec.gt_mask


def _largest_component(mask: np.ndarray) -> np.ndarray:
    labels, n = cc_label(mask)
    if n <= 1:
        return mask
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == counts.argmax()


def _ellipse_shape(rng, h, w):
    cy = rng.uniform(0.38, 0.62) * h
    cx = rng.uniform(0.38, 0.62) * w
    ry = rng.uniform(0.11, 0.19) * h
    rx = rng.uniform(0.11, 0.19) * w
    theta = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    c, s = np.cos(theta), np.sin(theta)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def _polygon_shape(rng, h, w):
    n = int(rng.integers(5, 10))
    cy = rng.uniform(0.40, 0.60) * h
    cx = rng.uniform(0.40, 0.60) * w
    base_r = rng.uniform(0.13, 0.20) * min(h, w)
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    radii = base_r * rng.uniform(0.55, 1.0, n)
    ys = cy + radii * np.sin(angles)
    xs = cx + radii * np.cos(angles)
    rr, cc = draw_polygon(ys, xs, shape=(h, w))
    out = np.zeros((h, w), dtype=bool)
    out[rr, cc] = True
    return out


def _blob_shape(rng, h, w):
    seed = int(rng.integers(0, 2 ** 31))
    field = (value_noise(h, w, scale=max(h, w) / 4.0, seed=seed)
             + 0.5 * value_noise(h, w, scale=max(h, w) / 8.0, seed=seed + 1))
    target = rng.uniform(0.06, 0.14)
    thr = np.quantile(field, 1.0 - target)
    return field >= thr


_SHAPES = {"ellipse": _ellipse_shape, "polygon": _polygon_shape,
           "blob": _blob_shape}


def _make_gt(rng, h, w, family: str) -> np.ndarray | None:
    mask = _SHAPES[family](rng, h, w)
    mask[:FRAME_MARGIN], mask[-FRAME_MARGIN:] = False, False
    mask[:, :FRAME_MARGIN], mask[:, -FRAME_MARGIN:] = False, False
    mask = _largest_component(mask)
    if not mask.any():
        return None
    # the GT must be a fixed point of the mask cleanup so exact recovery
    # is even representable
    for _ in range(6):
        cleaned = morph_clean(mask, 5)
        if np.array_equal(cleaned, mask):
            break
        mask = _largest_component(cleaned)
        if not mask.any():
            return None
    else:
        return None
    area = mask.mean()
    if not (AREA_BOUNDS[0] <= area <= AREA_BOUNDS[1]):
        return None
    # a shape too thin or sparse cannot be regrown within the per-step box
    # margin; keep suite objects reasonably plump
    box = bbox_of(mask, 1.0)
    if not (MIN_BBOX_SIDE <= min(box.width, box.height)
            and max(box.width, box.height) <= MAX_BBOX_SIDE):
        return None
    if mask.sum() / (box.width * box.height) < MIN_FILL_RATIO:
        return None
    return mask


def derive_prompts(gt: np.ndarray) -> dict[str, Prompt]:
    """All four prompt types from a GT mask: centroid point, tight box,
    skeleton scribble (clipped to 60 % of its length), eroded coarse mask."""
    gt = check_mask(gt)
    ys, xs = np.nonzero(gt)

    cx, cy = float(xs.mean()), float(ys.mean())
    if not gt[int(round(cy)), int(round(cx))]:
        # concave shape: snap the centroid to the nearest object pixel
        d2 = (ys - cy) ** 2 + (xs - cx) ** 2
        j = int(d2.argmin())
        cy, cx = float(ys[j]), float(xs[j])

    box = bbox_of(gt, 1.0)

    # uniform boundary peel keeping the target area fraction exactly:
    # drop the pixels nearest the boundary by distance-transform percentile
    dist = distance_transform_edt(gt)
    cut = np.quantile(dist[gt], 1.0 - COARSE_ERODE_TARGET)
    coarse = _largest_component(gt & (dist > cut))
    if not coarse.any():
        coarse = gt.copy()

    return {
        "point": PointPrompt(((cx, cy),)),
        "box": BoxPrompt(box),
        "scribble": ScribblePrompt(_scribble_from(gt)),
        "mask": CoarseMaskPrompt(coarse.copy()),
    }


def _scribble_from(gt: np.ndarray) -> np.ndarray:
    """Walk the skeleton from an endpoint and keep the first 60 %."""
    sk = skeletonize(gt)
    if not sk.any():
        ys, xs = np.nonzero(gt)
        sk = np.zeros_like(gt)
        sk[ys[len(ys) // 2], xs[len(xs) // 2]] = True
        return sk
    pixels = set(zip(*np.nonzero(sk)))

    def neighbors(p):
        y, x = p
        return [(y + dy, x + dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
                if (dy or dx) and (y + dy, x + dx) in pixels]

    endpoints = sorted(p for p in pixels if len(neighbors(p)) <= 1)
    start = endpoints[0] if endpoints else min(pixels)
    order, seen = [], {start}
    queue = deque([start])
    while queue:
        p = queue.popleft()
        order.append(p)
        for q in sorted(neighbors(p)):
            if q not in seen:
                seen.add(q)
                queue.append(q)
    keep = order[:max(1, math.ceil(SCRIBBLE_FRACTION * len(order)))]
    out = np.zeros_like(gt)
    for (y, x) in keep:
        out[y, x] = True
    return out


def gen_scenes(n: int, seed: int, dims: tuple[int, int] = (80, 80),
               shape_family: str = "mixed",
               noise_sigma: float = 0.0) -> list[Scene]:
    """n reproducible scenes with GT area in [5 %, 40 %] of the frame and
    all four prompt types derived per scene."""
    if n < 1:
        raise AmcpError("need at least one scene")
    families = tuple(_SHAPES) if shape_family == "mixed" else (shape_family,)
    if any(f not in _SHAPES for f in families):
        raise AmcpError(f"unknown shape family {shape_family!r}")
    h, w = dims
    scenes = []
    for i in range(n):
        gt = None
        attempt = 0
        while gt is None:
            rng = np.random.default_rng((seed, i, attempt))
            gt = _make_gt(rng, h, w, families[(i + attempt) % len(families)])
            attempt += 1
            if attempt > 200:
                raise AmcpError("scene generation failed to satisfy constraints")
        scene_seed = seed * 100_000 + i
        spec = SceneSpec(
            width=w, height=h,
            fg_texture=TextureSpec(base=FG_BASE, amplitude=TEXTURE_AMPLITUDE,
                                   seed=scene_seed * 2 + 1),
            bg_texture=TextureSpec(base=BG_BASE, amplitude=TEXTURE_AMPLITUDE,
                                   seed=scene_seed * 2 + 2),
            gt_mask=gt, noise_sigma=noise_sigma, seed=scene_seed,
        )
        scenes.append(Scene(index=i, spec=spec, image=spec.render_image(),
                            prompts=derive_prompts(gt)))
    return scenes


# ----------------------------------------------------------------------------
# prompt noise
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Rigid prompt translation with magnitude up to
    rate x (half of the GT box diagonal)."""

    rate: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.rate <= 1.0):
            raise AmcpError("noise rate must lie in [0, 1]")


def _shift_mask(mask: np.ndarray, dy: int, dx: int) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros_like(mask)
    ys, xs = np.nonzero(mask)
    ys, xs = ys + dy, xs + dx
    ok = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    out[ys[ok], xs[ok]] = True
    return out


def perturb_prompt(prompt: Prompt, gt_mask: np.ndarray, noise: NoiseSpec) -> Prompt:
    """Translate a prompt by a random vector, deterministically per seed.

    The whole prompt moves rigidly; coordinates are clamped to the frame
    (which may crop a box or mask at the border). A shift that would empty
    a mask prompt leaves it unchanged.
    """
    if noise.rate == 0.0:
        return prompt
    gt_mask = check_mask(gt_mask)
    h, w = gt_mask.shape
    box = bbox_of(gt_mask, 1.0)
    radius = noise.rate * math.hypot(box.width, box.height) / 2.0
    rng = np.random.default_rng(noise.seed)
    mag = rng.uniform(0.0, radius)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    dx, dy = mag * math.cos(theta), mag * math.sin(theta)

    if isinstance(prompt, PointPrompt):
        pts = tuple((min(max(x + dx, 0.0), w - 1.0), min(max(y + dy, 0.0), h - 1.0))
                    for (x, y) in prompt.points)
        return PointPrompt(pts)
    idx, idy = int(round(dx)), int(round(dy))
    if isinstance(prompt, BoxPrompt):
        b = prompt.box
        x0 = min(max(b.x0 + idx, 0), w - 1)
        y0 = min(max(b.y0 + idy, 0), h - 1)
        x1 = min(max(b.x1 + idx, x0 + 1), w)
        y1 = min(max(b.y1 + idy, y0 + 1), h)
        return BoxPrompt(Rect(x0, y0, x1, y1))
    shifted = _shift_mask(prompt.mask, idy, idx)
    if not shifted.any():
        return prompt
    if isinstance(prompt, ScribblePrompt):
        return ScribblePrompt(shifted)
    return CoarseMaskPrompt(shifted)


def prompt_overlaps_gt(prompt: Prompt, gt: np.ndarray) -> bool:
    """The task contract assumes the prompt touches the object; a perturbed
    prompt may break it, which is reported rather than hidden."""
    gt = check_mask(gt)
    if isinstance(prompt, PointPrompt):
        return any(gt[int(round(y)), int(round(x))] for (x, y) in prompt.points)
    if isinstance(prompt, BoxPrompt):
        ys, xs = prompt.box.slices
        return bool(gt[ys, xs].any())
    return bool((prompt.mask & gt).any())


# ----------------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------------


@dataclass
class ItemRow:
    item_id: str
    prompt_type: str
    noise_rate: float
    iou: float | None
    steps_run: int
    degenerate_steps: int
    wall_ms: float
    feasible: bool = True
    error: str | None = None


@dataclass
class Report:
    rows: list[ItemRow]
    mean_iou: float | None
    config: dict
    n_failed: int = 0

    CSV_COLUMNS = ("item_id", "prompt_type", "noise_rate", "iou",
                   "steps_run", "degenerate_steps", "wall_ms")

    def to_csv(self, path) -> None:
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(self.CSV_COLUMNS)
                for r in sorted(self.rows, key=lambda r: r.item_id):
                    writer.writerow([
                        r.item_id, r.prompt_type, r.noise_rate,
                        "" if r.iou is None else f"{r.iou:.6f}",
                        r.steps_run, r.degenerate_steps, f"{r.wall_ms:.3f}",
                    ])
        except OSError as exc:
            raise ReportWriteError(str(exc)) from exc

    def to_json(self, path) -> None:
        doc = {
            "mean_iou": self.mean_iou,
            "n_failed": self.n_failed,
            "config": self.config,
            "rows": [vars(r) for r in sorted(self.rows, key=lambda r: r.item_id)],
        }
        try:
            with open(path, "w") as f:
                json.dump(doc, f, indent=2, sort_keys=True)
        except OSError as exc:
            raise ReportWriteError(str(exc)) from exc


@dataclass
class DatasetItem:
    """File-backed evaluation item; prompts derive from GT unless an
    explicit prompt mask file is given."""

    item_id: str
    image_path: Path
    gt_path: Path
    prompt_source: str = "box"       # point | box | scribble | mask
    prompt_path: Path | None = None  # explicit prompt mask PNG
    scene_path: Path | None = None   # needed by the oracle painter

    def load(self) -> tuple[np.ndarray, np.ndarray, Prompt, SceneSpec | None]:
        image = load_image_png(self.image_path)
        gt = load_mask_png(self.gt_path)
        if image.shape[:2] != gt.shape:
            raise AmcpError(f"{self.item_id}: image and mask dimensions differ")
        if self.prompt_path is not None:
            raster = load_mask_png(self.prompt_path)
            prompt = (ScribblePrompt(raster) if self.prompt_source == "scribble"
                      else CoarseMaskPrompt(raster))
        else:
            prompt = derive_prompts(gt)[self.prompt_source]
        scene = SceneSpec.load(self.scene_path) if self.scene_path else None
        return image, gt, prompt, scene


@dataclass
class _Job:
    item_id: str
    index: int
    image: np.ndarray
    gt: np.ndarray
    prompt: Prompt
    painter: Painter


def _painter_for(painter_spec, scene: SceneSpec | None) -> Painter:
    if isinstance(painter_spec, Painter):
        return painter_spec
    return make_painter(painter_spec, scene=scene)


def _run_jobs(jobs: list[_Job], cfg: AmcpConfig, projector: Projector,
              noise: NoiseSpec | None, workers: int,
              trace_root: Path | None, config_echo: dict) -> Report:
    if not jobs:
        raise AmcpError("evaluation needs at least one item")

    def one(job: _Job) -> ItemRow:
        prompt = job.prompt
        noise_rate = 0.0
        if noise is not None and noise.rate > 0:
            noise_rate = noise.rate
            prompt = perturb_prompt(prompt, job.gt,
                                    NoiseSpec(noise.rate, noise.seed + job.index))
        feasible = prompt_overlaps_gt(prompt, job.gt)
        start = time.perf_counter()
        try:
            mask, traces = run(job.image, prompt, cfg, job.painter, projector)
        except AmcpError as exc:
            return ItemRow(job.item_id, prompt_kind(prompt), noise_rate, None,
                           0, 0, (time.perf_counter() - start) * 1e3,
                           feasible=feasible, error=str(exc))
        wall_ms = (time.perf_counter() - start) * 1e3
        if trace_root is not None:
            dump_trace(trace_root / job.item_id, traces, cfg)
        return ItemRow(job.item_id, prompt_kind(prompt), noise_rate,
                       iou(mask, job.gt), len(traces),
                       sum(t.degenerate_step for t in traces), wall_ms,
                       feasible=feasible)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]

    scored = [r.iou for r in rows if r.iou is not None]
    mean_iou = float(np.mean(scored)) if scored else None
    return Report(rows=rows, mean_iou=mean_iou, config=config_echo,
                  n_failed=sum(r.iou is None for r in rows))


def evaluate_scenes(scenes: list[Scene], prompt_type: str, cfg: AmcpConfig,
                    projector: Projector | None = None,
                    noise: NoiseSpec | None = None, workers: int = 1,
                    trace_root: Path | None = None) -> Report:
    """Run the loop over an in-memory suite with per-scene oracle painters."""
    if prompt_type not in PROMPT_TYPES:
        raise AmcpError(f"unknown prompt type {prompt_type!r}")
    projector = projector or IdentityProjector()
    jobs = [_Job(f"scene_{s.index:03d}", s.index, s.image, s.gt_mask,
                 s.prompts[prompt_type], OraclePainter(s.spec))
            for s in scenes]
    echo = {"amcp": cfg.echo(), "prompt_type": prompt_type,
            "noise": vars(noise) if noise else None, "painter": "oracle",
            "projector": type(projector).__name__}
    return _run_jobs(jobs, cfg, projector, noise, workers, trace_root, echo)


def evaluate(items: list[DatasetItem], cfg: AmcpConfig,
             painter: str | Painter = "oracle",
             projector: str | Projector = "identity",
             noise: NoiseSpec | None = None, workers: int = 1,
             trace_root: Path | None = None) -> Report:
    """File-backed evaluation; items that fail are recorded, not fatal."""
    if not items:
        raise AmcpError("evaluation needs at least one item")
    if isinstance(projector, str):
        projector = make_projector(projector)
    jobs = []
    for index, item in enumerate(items):
        image, gt, prompt, scene = item.load()
        jobs.append(_Job(item.item_id, index, image, gt, prompt,
                         _painter_for(painter, scene)))
    echo = {"amcp": cfg.echo(),
            "prompt_types": sorted({i.prompt_source for i in items}),
            "noise": vars(noise) if noise else None,
            "painter": painter if isinstance(painter, str) else type(painter).__name__,
            "projector": type(projector).__name__}
    return _run_jobs(jobs, cfg, projector, noise, workers, trace_root, echo)


# ----------------------------------------------------------------------------
# ablation sweeps
# ----------------------------------------------------------------------------

ABLATION_AXES = ("N", "T", "K", "box_rate", "ring_width")


def _config_for(cfg: AmcpConfig, axis: str, value) -> AmcpConfig:
    if axis == "N":
        return replace(cfg, n_samples=int(value))
    if axis == "T":
        return replace(cfg, steps=int(value), k_schedule=None)
    if axis == "K":
        return replace(cfg, k_schedule=(int(value),) * cfg.steps)
    if axis == "box_rate":
        return replace(cfg, box_rate=float(value))
    if axis == "ring_width":
        return replace(cfg, ring_width=int(value))
    raise AmcpError(f"unknown ablation axis {axis!r}; choose from {ABLATION_AXES}")


def ablate(scenes: list[Scene], cfg: AmcpConfig, axis: str, values,
           prompt_type: str = "mask", projector: Projector | None = None,
           noise: NoiseSpec | None = None,
           workers: int = 1) -> list[tuple[object, Report]]:
    """One evaluation per axis value over a shared suite and seed."""
    out = []
    for v in values:
        report = evaluate_scenes(scenes, prompt_type, _config_for(cfg, axis, v),
                                 projector=projector, noise=noise,
                                 workers=workers)
        out.append((v, report))
    return out


def write_ablation_csv(results: list[tuple[object, Report]], axis: str,
                       path) -> None:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow((axis,) + Report.CSV_COLUMNS)
            for value, report in results:
                for r in sorted(report.rows, key=lambda r: r.item_id):
                    writer.writerow([
                        value, r.item_id, r.prompt_type, r.noise_rate,
                        "" if r.iou is None else f"{r.iou:.6f}",
                        r.steps_run, r.degenerate_steps, f"{r.wall_ms:.3f}",
                    ])
    except OSError as exc:
        raise ReportWriteError(str(exc)) from exc


# ----------------------------------------------------------------------------
# suite persistence
# ----------------------------------------------------------------------------


def save_suite(scenes: list[Scene], out_dir: Path | str) -> Path:
    """Write images, GT/prompt rasters, per-scene specs and the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for s in scenes:
        stem = f"scene_{s.index:03d}"
        save_image_png(s.image, out / f"{stem}.png")
        save_mask_png(s.gt_mask, out / f"{stem}_gt.png")
        save_mask_png(s.prompts["mask"].mask, out / f"{stem}_coarse.png")
        save_mask_png(s.prompts["scribble"].mask, out / f"{stem}_scrib.png")
        s.spec.save(out / f"{stem}.scene.json", gt_path=out / f"{stem}_gt.png")
        box = s.prompts["box"].box
        point = s.prompts["point"].points[0]
        gt_box = bbox_of(s.gt_mask, 1.0)
        manifest.append({
            "id": stem,
            "seed": s.spec.seed,
            "texture_gap": s.spec.texture_gap,
            "noise_sigma": s.spec.noise_sigma,
            "gt_bbox": [gt_box.x0, gt_box.y0, gt_box.x1, gt_box.y1],
            "point": list(point),
            "box": [box.x0, box.y0, box.x1, box.y1],
            "files": {"image": f"{stem}.png", "gt": f"{stem}_gt.png",
                      "coarse": f"{stem}_coarse.png",
                      "scribble": f"{stem}_scrib.png",
                      "scene": f"{stem}.scene.json"},
        })
    with open(out / "scenes.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return out / "scenes.json"


def load_suite(suite_dir: Path | str) -> list[Scene]:
    suite_dir = Path(suite_dir)
    with open(suite_dir / "scenes.json") as f:
        manifest = json.load(f)
    scenes = []
    for i, entry in enumerate(manifest):
        spec = SceneSpec.load(suite_dir / entry["files"]["scene"])
        image = load_image_png(suite_dir / entry["files"]["image"])
        prompts = {
            "point": PointPrompt((tuple(entry["point"]),)),
            "box": BoxPrompt(Rect(*entry["box"])),
            "scribble": ScribblePrompt(
                load_mask_png(suite_dir / entry["files"]["scribble"])),
            "mask": CoarseMaskPrompt(
                load_mask_png(suite_dir / entry["files"]["coarse"])),
        }
        scenes.append(Scene(index=i, spec=spec, image=image, prompts=prompts))
    return scenes
