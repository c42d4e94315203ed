"""Painting and feature-projection sidecar speaking the segmentation
engine's wire protocol."""

from .models import (DiffusionFillPainter, ModelUnavailable,
                     PatchStatsProjector, load_painter, load_projector)
from .server import ServiceConfig, create_app

__version__ = "0.1.0"

__all__ = ["DiffusionFillPainter", "ModelUnavailable", "PatchStatsProjector",
           "ServiceConfig", "create_app", "load_painter", "load_projector"]
