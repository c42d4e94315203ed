"""Command-line front door.

One JSON summary line per run goes to stdout; human-readable logging goes
to stderr. Exit codes: 0 success, 2 bad input, 3 backend failure.
Configuration precedence: built-in defaults < --config JSON file < flags.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .core import (Rect, erode, iou, load_image_png, load_mask_png,
                   save_image_png, save_mask_png)
from .engine import (AmcpConfig, BoxPrompt, CoarseMaskPrompt, PointPrompt,
                     Prompt, ScribblePrompt, dump_trace, erase_object, run)
from .errors import AmcpError, BackendUnavailable, ProtocolError, Timeout
from .evalharness import (ABLATION_AXES, NoiseSpec, ablate, evaluate_scenes,
                          gen_scenes, load_suite, save_suite,
                          write_ablation_csv)
from .painters import make_painter
from .potential import PotentialWeights
from .projectors import make_projector
from .scenes import SceneSpec

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_BACKEND = 3

CONFIG_KEYS = ("steps", "n_samples", "k_schedule", "lambda_paint",
               "lambda_color", "lambda_prompt", "ring_width", "clean_kernel",
               "box_rate", "sigma_fraction", "avg_threshold",
               "diffusion_steps", "seed")


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


def emit(cmd: str, out_paths: list, wall_ms: float, **extra) -> None:
    doc = {"cmd": cmd, "out_paths": [str(p) for p in out_paths],
           "wall_ms": round(wall_ms, 3)}
    doc.update(extra)
    print(json.dumps(doc, sort_keys=True))


def parse_prompt(text: str) -> Prompt:
    kind, _, payload = text.partition(":")
    try:
        if kind == "point":
            pts = tuple(tuple(float(v) for v in pair.split(","))
                        for pair in payload.split(";"))
            if any(len(p) != 2 for p in pts):
                raise ValueError("each point needs x,y")
            return PointPrompt(pts)
        if kind == "box":
            x0, y0, x1, y1 = (int(v) for v in payload.split(","))
            return BoxPrompt(Rect(x0, y0, x1, y1))
        if kind == "scribble":
            return ScribblePrompt(load_mask_png(payload))
        if kind == "mask":
            return CoarseMaskPrompt(load_mask_png(payload))
    except (ValueError, AmcpError) as exc:
        raise AmcpError(
            f"bad prompt {text!r} ({exc}); expected point:X,Y[;X,Y...] | "
            f"box:x0,y0,x1,y1 | scribble:path.png | mask:path.png") from exc
    raise AmcpError(
        f"unknown prompt kind {kind!r}; expected point | box | scribble | mask")


def build_config(args) -> AmcpConfig:
    """defaults < config file < explicit flags"""
    merged = {}
    if args.config:
        with open(args.config) as f:
            doc = json.load(f)
        unknown = set(doc) - set(CONFIG_KEYS)
        if unknown:
            raise AmcpError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    if isinstance(merged.get("k_schedule"), str):
        merged["k_schedule"] = tuple(
            int(v) for v in merged["k_schedule"].split(","))
    elif isinstance(merged.get("k_schedule"), list):
        merged["k_schedule"] = tuple(merged["k_schedule"])
    lam_prompt = merged.pop("lambda_prompt", None)
    lam_paint = merged.pop("lambda_paint", None)
    lam_color = merged.pop("lambda_color", None)
    weights = PotentialWeights(
        lambda_paint=0.8 if lam_paint is None else lam_paint,
        lambda_color=0.2 if lam_color is None else lam_color,
        lambda_prompt_istep=0.2 if lam_prompt is None else lam_prompt,
        lambda_prompt_ostep=-(0.2 if lam_prompt is None else lam_prompt),
    )
    return AmcpConfig(weights=weights, **merged)


def resolve_backends(args):
    scene = SceneSpec.load(args.scene) if getattr(args, "scene", None) else None
    painter = make_painter(args.painter, scene=scene, timeout=args.timeout)
    projector = make_projector(args.projector, timeout=args.timeout)
    return painter, projector


def add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with loop parameters")
    p.add_argument("--steps", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--k-schedule", dest="k_schedule",
                   help="comma-separated cluster counts, one per step")
    p.add_argument("--lambda-paint", dest="lambda_paint", type=float)
    p.add_argument("--lambda-color", dest="lambda_color", type=float)
    p.add_argument("--lambda-prompt", dest="lambda_prompt", type=float)
    p.add_argument("--ring-width", dest="ring_width", type=int)
    p.add_argument("--clean-kernel", dest="clean_kernel", type=int)
    p.add_argument("--box-rate", dest="box_rate", type=float)
    p.add_argument("--sigma-fraction", dest="sigma_fraction", type=float)
    p.add_argument("--avg-threshold", dest="avg_threshold", type=float)
    p.add_argument("--diffusion-steps", dest="diffusion_steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--painter", default="meanfill",
                   help="oracle | meanfill | remote:URL")
    p.add_argument("--projector", default="patchstats",
                   help="identity | patchstats | remote:URL")
    p.add_argument("--scene", help="scene spec JSON (oracle painter)")
    p.add_argument("--timeout", type=float, default=120.0,
                   help="remote request timeout in seconds")


def overlay_boundary(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = image.copy()
    boundary = mask & ~erode(mask, 1) if mask.any() else mask
    out[boundary] = [1.0, 0.0, 0.0]
    return out


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_segment(args) -> int:
    start = time.perf_counter()
    image = load_image_png(args.image)
    prompt = parse_prompt(args.prompt)
    cfg = build_config(args)
    painter, projector = resolve_backends(args)
    mask, traces = run(image, prompt, cfg, painter, projector)
    out_paths = [args.out]
    save_mask_png(mask, args.out)
    if args.trace:
        out_paths.append(dump_trace(args.trace, traces, cfg))
    if args.overlay:
        save_image_png(overlay_boundary(image, mask), args.overlay)
        out_paths.append(args.overlay)
    extra = {}
    if args.gt:
        extra["iou"] = iou(mask, load_mask_png(args.gt))
        log(f"IoU vs {args.gt}: {extra['iou']:.4f}")
    log(f"mask area {int(mask.sum())} px -> {args.out}")
    emit("segment", out_paths, (time.perf_counter() - start) * 1e3, **extra)
    return EXIT_OK


def cmd_synth(args) -> int:
    start = time.perf_counter()
    dims = tuple(int(v) for v in args.dims.split("x"))
    if len(dims) != 2:
        raise AmcpError("--dims expects WxH")
    w, h = dims
    scenes = gen_scenes(args.n, seed=args.seed, dims=(h, w),
                        shape_family=args.family, noise_sigma=args.sigma)
    manifest = save_suite(scenes, args.out)
    log(f"wrote {len(scenes)} scenes under {args.out}")
    emit("synth", [manifest], (time.perf_counter() - start) * 1e3,
         n_scenes=len(scenes))
    return EXIT_OK


def cmd_eval(args) -> int:
    start = time.perf_counter()
    scenes = load_suite(args.suite)
    cfg = build_config(args)
    noise = NoiseSpec(args.noise, args.noise_seed) if args.noise else None
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_root = out_dir / "traces" if args.trace else None
    projector = make_projector(args.projector, timeout=args.timeout)
    report = evaluate_scenes(scenes, args.prompt_type, cfg,
                             projector=projector, noise=noise,
                             workers=args.workers, trace_root=trace_root)
    csv_path = out_dir / "report.csv"
    json_path = out_dir / "report.json"
    report.to_csv(csv_path)
    report.to_json(json_path)
    log(f"mean IoU {report.mean_iou:.4f} over {len(report.rows)} items "
        f"({report.n_failed} failed)")
    emit("eval", [csv_path, json_path], (time.perf_counter() - start) * 1e3,
         mean_iou=report.mean_iou)
    return EXIT_OK


def cmd_ablate(args) -> int:
    start = time.perf_counter()
    scenes = load_suite(args.suite)
    cfg = build_config(args)
    values = [float(v) if "." in v else int(v) for v in args.values.split(",")]
    noise = NoiseSpec(args.noise, args.noise_seed) if args.noise else None
    results = ablate(scenes, cfg, args.axis, values,
                     prompt_type=args.prompt_type, noise=noise,
                     workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"ablate_{args.axis}.csv"
    write_ablation_csv(results, args.axis, csv_path)
    means = {str(v): r.mean_iou for v, r in results}
    log(f"{args.axis} sweep: " +
        ", ".join(f"{k}={v:.4f}" for k, v in means.items()))
    emit("ablate", [csv_path], (time.perf_counter() - start) * 1e3,
         means=means)
    return EXIT_OK


def cmd_erase(args) -> int:
    start = time.perf_counter()
    image = load_image_png(args.image)
    mask = load_mask_png(args.mask)
    painter, _ = resolve_backends(args)
    cfg = build_config(args)
    out = erase_object(image, mask, painter, seed=cfg.seed,
                       diffusion_steps=cfg.diffusion_steps)
    save_image_png(out, args.out)
    log(f"object erased -> {args.out}")
    emit("erase", [args.out], (time.perf_counter() - start) * 1e3)
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser wiring
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amcpseg",
        description="Prompt-guided object segmentation by contrastive painting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one image")
    p.add_argument("--image", required=True)
    p.add_argument("--prompt", required=True,
                   help="point:X,Y[;X,Y...] | box:x0,y0,x1,y1 | "
                        "scribble:path.png | mask:path.png")
    p.add_argument("--out", required=True, help="output mask PNG")
    p.add_argument("--trace", help="directory for per-step traces")
    p.add_argument("--overlay", help="write a boundary overlay PNG")
    p.add_argument("--gt", help="optional GT mask to score against")
    add_common_flags(p)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("synth", help="generate a synthetic scene suite")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dims", default="80x80", help="WxH")
    p.add_argument("--family", default="mixed",
                   choices=("mixed", "ellipse", "polygon", "blob"))
    p.add_argument("--sigma", type=float, default=0.0,
                   help="painter sample noise recorded in the scenes")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--prompt-type", dest="prompt_type", default="box",
                   choices=("point", "box", "scribble", "mask"))
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--noise-seed", dest="noise_seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out", required=True)
    add_common_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one design axis over a suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--axis", required=True, choices=ABLATION_AXES)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--prompt-type", dest="prompt_type", default="mask",
                   choices=("point", "box", "scribble", "mask"))
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--noise-seed", dest="noise_seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    add_common_flags(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("erase", help="paint the masked object away")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    add_common_flags(p)
    p.set_defaults(fn=cmd_erase)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the contract
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except (BackendUnavailable, Timeout, ProtocolError) as exc:
        log(f"backend failure: {exc}")
        return EXIT_BACKEND
    except (AmcpError, OSError, json.JSONDecodeError) as exc:
        log(f"error: {exc}")
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
