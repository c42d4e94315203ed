"""HTTP service exposing /v1/paint, /v1/project and /v1/health.

Wire protocol: JSON bodies with base64 PNG rasters on a fixed 512x512
canvas. Schema violations return 400 with {"error": ...}; requests beyond
the job capacity return 503 with a Retry-After header. Kept pixels are
re-composited server-side so responses honour the bit-exactness contract
regardless of what a model does to them.
"""
from __future__ import annotations

import argparse
import base64
import io
import threading
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .models import load_painter, load_projector

CANVAS = 512


@dataclass
class ServiceConfig:
    painter_model: str = "builtin-diffusion"
    projector_model: str = "builtin-patch"
    device: str = "cpu"
    max_jobs: int = 2
    host: str = "127.0.0.1"
    port: int = 8750


class PadInfo(BaseModel):
    left: int = Field(ge=0)
    top: int = Field(ge=0)
    orig_w: int = Field(ge=1)
    orig_h: int = Field(ge=1)


class PaintBody(BaseModel):
    image: str
    keep_mask: str
    n_samples: int = Field(ge=1, le=64)
    seed: int
    diffusion_steps: int = Field(ge=1, le=1000)
    pad: PadInfo


class ProjectBody(BaseModel):
    image: str
    pad: PadInfo


class SchemaError(Exception):
    pass


class JobLimiter:
    """Bounded concurrency: reject, never queue, beyond capacity."""

    def __init__(self, max_jobs: int):
        self._sem = threading.BoundedSemaphore(max_jobs)

    def try_acquire(self) -> bool:
        return self._sem.acquire(blocking=False)

    def release(self) -> None:
        self._sem.release()


def decode_png(b64: str, mode: str) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(b64, validate=True)))
    except Exception as exc:
        raise SchemaError(f"undecodable PNG payload: {exc}") from exc
    if img.mode != mode:
        raise SchemaError(f"expected mode {mode!r}, got {img.mode!r}")
    if img.size != (CANVAS, CANVAS):
        raise SchemaError(
            f"expected a {CANVAS}x{CANVAS} canvas, got {img.size[0]}x{img.size[1]}")
    return np.asarray(img)


def encode_png(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(cfg: ServiceConfig | None = None) -> FastAPI:
    cfg = cfg or ServiceConfig()
    painter = load_painter(cfg.painter_model)    # raises before binding
    projector = load_projector(cfg.projector_model)
    limiter = JobLimiter(cfg.max_jobs)

    app = FastAPI(title="amcp model service")
    app.state.config = cfg
    app.state.limiter = limiter

    @app.exception_handler(RequestValidationError)
    async def bad_schema(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(SchemaError)
    async def bad_payload(request: Request, exc: SchemaError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    def busy_response():
        return JSONResponse(status_code=503,
                            content={"error": "at capacity"},
                            headers={"Retry-After": "1"})

    @app.get("/v1/health")
    def health():
        return {"status": "ok",
                "models": {"painter": painter.name,
                           "projector": projector.name,
                           "device": cfg.device}}

    @app.post("/v1/paint")
    def paint(body: PaintBody):
        if not limiter.try_acquire():
            return busy_response()
        try:
            rgb = decode_png(body.image, "RGB").astype(np.float64) / 255.0
            mask_arr = decode_png(body.keep_mask, "L")
            if not np.isin(np.unique(mask_arr), (0, 255)).all():
                raise SchemaError("keep mask must be 0/255")
            keep = mask_arr == 255
            # the client crops to the valid region, so nothing outside it
            # needs painting; treat the pad area as kept
            pad = body.pad
            valid = np.zeros_like(keep)
            valid[pad.top:pad.top + pad.orig_h,
                  pad.left:pad.left + pad.orig_w] = True
            samples = painter.paint(rgb, keep | ~valid, body.n_samples,
                                    body.seed, body.diffusion_steps)
            original = np.round(rgb * 255.0).astype(np.uint8)
            blobs = []
            for s in samples:
                s = s.copy()
                s[keep] = original[keep]     # bit-exact kept pixels
                blobs.append(encode_png(s))
            return {"samples": blobs}
        finally:
            limiter.release()

    @app.post("/v1/project")
    def project(body: ProjectBody):
        if not limiter.try_acquire():
            return busy_response()
        try:
            rgb = decode_png(body.image, "RGB").astype(np.float64) / 255.0
            grid = projector.project(rgb)
            return {
                "stride": projector.stride,
                "channels": projector.channels,
                "data": base64.b64encode(grid.tobytes()).decode("ascii"),
            }
        finally:
            limiter.release()

    return app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="amcp-model-service",
        description="painting / feature-projection sidecar")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument("--painter-model", default="builtin-diffusion")
    parser.add_argument("--projector-model", default="builtin-patch")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-jobs", type=int, default=2)
    args = parser.parse_args(argv)

    import uvicorn
    cfg = ServiceConfig(painter_model=args.painter_model,
                        projector_model=args.projector_model,
                        device=args.device, max_jobs=args.max_jobs,
                        host=args.host, port=args.port)
    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
