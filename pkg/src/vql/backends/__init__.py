"""Backend interfaces: segmentation, feature extraction, frames, tracking.

Live model backends, the synthetic oracle backend, and store-backed bridge
views all implement these protocols, so the pipeline stages never know which
one they are driving.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from vql.core import BBox


@dataclass(frozen=True)
class FrameView:
    """Pixels for a frame or for a crop of it, always at native frame dims.

    rect is the source-frame rectangle the pixels cover; zoom is the
    magnification factor (frame width / rect width, equal on both axes).
    A full-frame view has zoom 1.
    """

    frame_index: int
    pixels: np.ndarray  # (H, W, 3) uint8
    rect: BBox
    zoom: float

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def to_view_coords(self, box: BBox) -> BBox:
        """Map a source-frame box into this view's pixel coordinates."""
        return BBox(
            (box.x - self.rect.x) * self.zoom,
            (box.y - self.rect.y) * self.zoom,
            box.w * self.zoom,
            box.h * self.zoom,
        )

    def to_frame_coords(self, box: BBox) -> BBox:
        """Map a view-coordinate box back onto the source frame."""
        return BBox(
            box.x / self.zoom + self.rect.x,
            box.y / self.zoom + self.rect.y,
            box.w / self.zoom,
            box.h / self.zoom,
        )


@runtime_checkable
class Segmenter(Protocol):
    segmenter_id: str

    def segment(self, view: FrameView) -> list[np.ndarray]:
        """Class-agnostic region masks as (H, W) bool grids."""
        ...


@runtime_checkable
class FeatureExtractor(Protocol):
    extractor_id: str
    dim: int

    def extract(self, view: FrameView) -> np.ndarray:
        """Dense (h, w, dim) feature map for the view."""
        ...


class FrameSource(Protocol):
    video_id: str
    width: int
    height: int
    frame_count: int
    fps: float

    def pixels(self, frame_index: int) -> np.ndarray:
        ...

    def view(self, frame_index: int, rect: BBox) -> FrameView:
        """Crop rect out of the frame and resample it to native dims."""
        ...


class TrackerBackend(Protocol):
    tracker_id: str

    def track(
        self,
        seed_frame: int,
        seed_box: BBox,
        seed_embedding: np.ndarray | None,
        lo: int,
        hi: int,
    ) -> list[tuple[int, BBox]]:
        """Contiguous per-frame boxes containing seed_frame, within [lo, hi]."""
        ...


@dataclass
class BackendBundle:
    """Everything the pipeline needs to run against one video."""

    frames: FrameSource
    segmenter: Segmenter | None
    extractor: FeatureExtractor | None
    tracker: TrackerBackend
    # False when the backend pair cannot process crop views (offline bridge
    # artifacts); refinement then degrades to its failure path by contract.
    supports_views: bool = True
