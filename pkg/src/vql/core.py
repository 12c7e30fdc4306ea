"""Core value types for the localization engine.

Boxes are continuous (x, y, w, h) with the origin at the top-left corner.
Masks are run-length encoded in row-major order, alternating zero-run then
one-run, where only the leading zero-run may be empty. Frame indices always
refer to the sampled frame sequence, not source-video frames.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np


class EngineError(Exception):
    """Base class for engine failures."""


class MalformedMaskError(EngineError):
    """Run-length data that cannot decode into a valid mask."""


class SchemaError(EngineError):
    """A file or record that does not match its declared schema."""


class BackendError(EngineError):
    """A segmenter/extractor/tracker backend failed."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous image coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box must have positive extent, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def right(self) -> float:
        return self.x + self.w

    @property
    def bottom(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def clamp(self, frame_w: float, frame_h: float) -> "BBox":
        """Clip to the frame so that x >= 0, y >= 0, x+w <= frame_w, y+h <= frame_h."""
        x0 = min(max(self.x, 0.0), frame_w)
        y0 = min(max(self.y, 0.0), frame_h)
        x1 = min(max(self.right, 0.0), frame_w)
        y1 = min(max(self.bottom, 0.0), frame_h)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"box {self} lies outside a {frame_w}x{frame_h} frame")
        return BBox(x0, y0, x1 - x0, y1 - y0)

    def to_json(self) -> dict[str, float]:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @staticmethod
    def from_json(obj: dict) -> "BBox":
        try:
            return BBox(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed box record: {obj!r}") from exc


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two continuous boxes. Zero when disjoint."""
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class BinaryMask:
    """Run-length encoded binary mask.

    runs alternate background then foreground counts, row-major. The first
    run (background) may be zero; every later run must be positive and the
    total must equal width*height with at least one foreground pixel.
    """

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise MalformedMaskError(f"mask dims must be positive, got {self.width}x{self.height}")
        if not self.runs:
            raise MalformedMaskError("empty run list")
        if any(r < 0 for r in self.runs):
            raise MalformedMaskError(f"negative run length in {self.runs}")
        if any(r == 0 for r in self.runs[1:]):
            raise MalformedMaskError("zero-length run after the first")
        total = sum(self.runs)
        if total != self.width * self.height:
            raise MalformedMaskError(
                f"run sum {total} != {self.width}x{self.height} = {self.width * self.height}"
            )
        if sum(self.runs[1::2]) == 0:
            raise MalformedMaskError("mask has no foreground pixels")

    @property
    def foreground(self) -> int:
        return sum(self.runs[1::2])

    def area_fraction(self) -> float:
        return self.foreground / (self.width * self.height)


def decode_mask(mask: BinaryMask) -> np.ndarray:
    """Expand RLE into a (height, width) bool grid."""
    flat = np.zeros(mask.width * mask.height, dtype=bool)
    pos = 0
    value = False
    for run in mask.runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(mask.height, mask.width)


def encode_mask(grid: np.ndarray) -> BinaryMask:
    """Run-length encode a (height, width) bool grid."""
    if grid.ndim != 2:
        raise MalformedMaskError(f"expected 2-d grid, got shape {grid.shape}")
    h, w = grid.shape
    flat = np.asarray(grid, dtype=bool).reshape(-1)
    if not flat.any():
        raise MalformedMaskError("mask has no foreground pixels")
    # Boundaries between unequal neighbours, expressed as run lengths.
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return BinaryMask(width=w, height=h, runs=tuple(int(r) for r in runs))


def tight_bbox(mask: BinaryMask) -> BBox:
    """Smallest box covering every foreground pixel of the mask."""
    grid = decode_mask(mask)
    rows = np.flatnonzero(grid.any(axis=1))
    cols = np.flatnonzero(grid.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    return BBox(x=float(c0), y=float(r0), w=float(c1 - c0 + 1), h=float(r1 - r0 + 1))


@dataclass(frozen=True)
class FrameRef:
    """A frame in the sampled sequence."""

    video_id: str
    frame_index: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"frame dims must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class RegionToken:
    """One segmented region: its geometry plus a pooled embedding."""

    frame: FrameRef
    region_id: int
    bbox: BBox
    mask: BinaryMask
    area_fraction: float
    embedding: np.ndarray  # (d,) float32, unit-agnostic but finite and nonzero

    def __post_init__(self) -> None:
        if self.region_id < 0:
            raise ValueError(f"region_id must be >= 0, got {self.region_id}")
        emb = np.asarray(self.embedding)
        if emb.ndim != 1:
            raise ValueError(f"embedding must be 1-d, got shape {emb.shape}")
        if not np.all(np.isfinite(emb)):
            raise ValueError(
                f"non-finite embedding for token frame={self.frame.frame_index} region={self.region_id}"
            )
        if float(np.dot(emb, emb)) == 0.0:
            raise ValueError(
                f"zero-norm embedding for token frame={self.frame.frame_index} region={self.region_id}"
            )


@dataclass(frozen=True)
class QueryToken:
    """A query-side embedding with provenance for the expansion filters."""

    embedding: np.ndarray
    origin: str  # "original" | "expanded"
    source_frame: int | None
    sim_to_original: float
    area_fraction: float
    blur_variance: float

    def __post_init__(self) -> None:
        if self.origin not in ("original", "expanded"):
            raise ValueError(f"origin must be original|expanded, got {self.origin!r}")
        if self.origin == "original" and self.sim_to_original != 1.0:
            raise ValueError("original query token must have sim_to_original = 1")
        emb = np.asarray(self.embedding)
        if not np.all(np.isfinite(emb)) or float(np.dot(emb, emb)) == 0.0:
            raise ValueError("query embedding must be finite with nonzero norm")


@dataclass(frozen=True)
class ScoredCandidate:
    """A region token paired with its query similarity, possibly refined."""

    frame_index: int
    region_id: int
    bbox: BBox
    embedding: np.ndarray
    score: float
    token_index: int
    refined: bool = False
    refine_failed: bool = False


@dataclass(frozen=True)
class ResponseTrack:
    """Contiguous per-frame boxes with a single track confidence."""

    boxes: tuple[tuple[int, BBox], ...]
    score: float

    def __post_init__(self) -> None:
        if not self.boxes:
            raise ValueError("response track must be non-empty")
        frames = [f for f, _ in self.boxes]
        for prev, cur in zip(frames, frames[1:]):
            if cur != prev + 1:
                raise ValueError(f"track frames must be consecutive, got {frames}")

    @property
    def start(self) -> int:
        return self.boxes[0][0]

    @property
    def end(self) -> int:
        return self.boxes[-1][0]

    def box_at(self, frame: int) -> BBox:
        return self.boxes[frame - self.start][1]


@dataclass(frozen=True)
class LocalizationRequest:
    """One query: where was this object last seen before query_time."""

    video_id: str
    query_id: str
    query_frame: int
    query_box: BBox
    query_time: int

    def __post_init__(self) -> None:
        if self.query_time < 0:
            raise ValueError(f"query_time must be >= 0, got {self.query_time}")
        if self.query_frame < 0:
            raise ValueError(f"query_frame must be >= 0, got {self.query_frame}")


_CONFIG_BOUNDS = {
    "t_sim": (-1.0, 1.0),
    "t_q": (-1.0, 1.0),
}


@dataclass(frozen=True)
class EngineConfig:
    """Engine parameters. Field names double as the config-file schema."""

    fps: float = 5.0
    k: int = 10
    t_sim: float = 0.7
    t_nms: float = 0.8
    t_q: float = 0.5
    area_min_fraction: float = 0.0007
    blur_var_min: float = 100.0
    zoom_cap: float = 2.5
    crop_target_occupancy: float = 0.5
    update_ratio: float = 0.9
    track_w_sim: float = 0.5
    track_w_iou: float = 0.5
    track_stop: float = 0.6
    blur_on_crop: bool = True

    def __post_init__(self) -> None:
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (0.0 < self.t_nms < 1.0):
            raise ValueError(f"t_nms must lie in (0, 1), got {self.t_nms}")
        for name, (lo, hi) in _CONFIG_BOUNDS.items():
            val = getattr(self, name)
            if not (lo <= val <= hi):
                raise ValueError(f"{name} must lie in [{lo}, {hi}], got {val}")
        if self.zoom_cap < 1.0:
            raise ValueError(f"zoom_cap must be >= 1, got {self.zoom_cap}")
        if not (0.0 < self.crop_target_occupancy <= 1.0):
            raise ValueError(
                f"crop_target_occupancy must lie in (0, 1], got {self.crop_target_occupancy}"
            )
        if self.area_min_fraction < 0 or self.blur_var_min < 0:
            raise ValueError("filter floors must be >= 0")
        if self.update_ratio < 0:
            raise ValueError(f"update_ratio must be >= 0, got {self.update_ratio}")
        if self.track_w_sim < 0 or self.track_w_iou < 0:
            raise ValueError("tracker weights must be >= 0")

    def with_overrides(self, **overrides) -> "EngineConfig":
        return replace(self, **overrides)

    @staticmethod
    def field_names() -> tuple[str, ...]:
        return tuple(f.name for f in fields(EngineConfig))

    @classmethod
    def from_json(cls, obj: dict) -> "EngineConfig":
        known = set(cls.field_names())
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except OSError as exc:
            raise SchemaError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise SchemaError(f"config {path} must hold a JSON object")
        return cls.from_json(obj)
