"""Turning video frames into region tokens.

tokenize_frame runs the segmenter and extractor on one view and pools an
embedding per mask; build_token_set does that for a whole video, optionally
fanning out over frames. Region ids are the segmenter's output order within a
frame; the flat token list is sorted by (frame_index, region_id).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from vql.backends import FeatureExtractor, FrameSource, FrameView, Segmenter
from vql.core import (
    BackendError,
    BBox,
    BinaryMask,
    FrameRef,
    QueryToken,
    RegionToken,
    box_iou,
    encode_mask,
    tight_bbox,
)
from vql.features import pooled_embedding
from vql.images import laplacian_variance


@dataclass(frozen=True)
class VideoTokenSet:
    """All region tokens of one video plus their embedding matrix."""

    video_id: str
    fps: float
    width: int
    height: int
    dim: int
    segmenter_id: str
    extractor_id: str
    frame_count: int
    tokens: tuple[RegionToken, ...]
    embeddings: np.ndarray  # (N, dim) float32; row i belongs to tokens[i]
    frame_ranges: np.ndarray  # (frame_count, 2) int64 [start, end) into tokens

    def __post_init__(self) -> None:
        if self.embeddings.shape != (len(self.tokens), self.dim):
            raise ValueError(
                f"embedding matrix {self.embeddings.shape} does not match "
                f"{len(self.tokens)} tokens of dim {self.dim}"
            )
        last = (-1, -1)
        for tok in self.tokens:
            key = (tok.frame.frame_index, tok.region_id)
            if key <= last:
                raise ValueError(f"tokens not sorted by (frame_index, region_id) at {key}")
            last = key

    def __len__(self) -> int:
        return len(self.tokens)

    def frame_slice(self, frame_index: int) -> slice:
        s, e = self.frame_ranges[frame_index]
        return slice(int(s), int(e))

    def frame_tokens(self, frame_index: int) -> tuple[RegionToken, ...]:
        return self.tokens[self.frame_slice(frame_index)]


def _assemble(
    video_id: str,
    fps: float,
    width: int,
    height: int,
    dim: int,
    segmenter_id: str,
    extractor_id: str,
    frame_count: int,
    tokens: list[RegionToken],
) -> VideoTokenSet:
    if tokens:
        matrix = np.stack([t.embedding for t in tokens]).astype(np.float32)
    else:
        matrix = np.zeros((0, dim), dtype=np.float32)
    matrix.setflags(write=False)
    ranges = np.zeros((frame_count, 2), dtype=np.int64)
    cursor = 0
    for fi in range(frame_count):
        start = cursor
        while cursor < len(tokens) and tokens[cursor].frame.frame_index == fi:
            cursor += 1
        ranges[fi] = (start, cursor)
    return VideoTokenSet(
        video_id=video_id,
        fps=fps,
        width=width,
        height=height,
        dim=dim,
        segmenter_id=segmenter_id,
        extractor_id=extractor_id,
        frame_count=frame_count,
        tokens=tuple(tokens),
        embeddings=matrix,
        frame_ranges=ranges,
    )


def tokenize_frame(
    view: FrameView,
    frame: FrameRef,
    segmenter: Segmenter,
    extractor: FeatureExtractor,
) -> list[RegionToken]:
    """Region tokens for one frame view, in segmenter output order."""
    try:
        grids = segmenter.segment(view)
        fm = extractor.extract(view)
    except Exception as exc:
        raise BackendError(f"backend failure on frame {frame.frame_index}: {exc}") from exc
    tokens: list[RegionToken] = []
    area = frame.width * frame.height
    for region_id, grid in enumerate(grids):
        mask = encode_mask(grid)
        emb = pooled_embedding(fm, grid).astype(np.float32)
        bbox = tight_bbox(mask)
        tokens.append(
            RegionToken(
                frame=frame,
                region_id=region_id,
                bbox=bbox,
                mask=mask,
                area_fraction=mask.foreground / area,
                embedding=emb,
            )
        )
    return tokens


def build_token_set(
    frames: FrameSource,
    segmenter: Segmenter,
    extractor: FeatureExtractor,
    threads: int = 1,
) -> VideoTokenSet:
    """Tokenize every sampled frame. Output order is by frame index
    regardless of how the per-frame work is scheduled."""

    def work(fi: int) -> list[RegionToken]:
        ref = FrameRef(frames.video_id, fi, frames.width, frames.height)
        rect = BBox(0, 0, frames.width, frames.height)
        return tokenize_frame(frames.view(fi, rect), ref, segmenter, extractor)

    indices = range(frames.frame_count)
    if threads > 1 and frames.frame_count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_frame = list(pool.map(work, indices))
    else:
        per_frame = [work(fi) for fi in indices]
    flat = [tok for toks in per_frame for tok in toks]
    return _assemble(
        frames.video_id,
        frames.fps,
        frames.width,
        frames.height,
        extractor.dim,
        segmenter.segmenter_id,
        extractor.extractor_id,
        frames.frame_count,
        flat,
    )


def _blur_of_box(view: FrameView, box: BBox) -> float:
    """Laplacian variance of the box's pixels, padded to the 3x3 minimum."""
    x0 = int(np.floor(box.x))
    y0 = int(np.floor(box.y))
    x1 = int(np.ceil(box.right))
    y1 = int(np.ceil(box.bottom))
    while x1 - x0 < 3:
        x0 = max(x0 - 1, 0)
        x1 = min(x1 + 1, view.width)
    while y1 - y0 < 3:
        y0 = max(y0 - 1, 0)
        y1 = min(y1 + 1, view.height)
    crop = view.pixels[y0:y1, x0:x1]
    if crop.shape[0] < 3 or crop.shape[1] < 3:
        return float("inf")  # degenerate frame; nothing to measure
    return laplacian_variance(crop)


def tokenize_query(
    view: FrameView,
    box: BBox,
    segmenter: Segmenter,
    extractor: FeatureExtractor,
) -> tuple[QueryToken, bool]:
    """Pool the query into a token via the best-overlapping mask.

    Falls back to treating the box interior as the mask when no produced mask
    overlaps it; the second return value reports that fallback.
    """
    box = box.clamp(view.width, view.height)
    try:
        grids = segmenter.segment(view)
        fm = extractor.extract(view)
    except Exception as exc:
        raise BackendError(f"backend failure on query frame {view.frame_index}: {exc}") from exc
    best_iou = 0.0
    best_grid = None
    for grid in grids:
        iou = box_iou(tight_bbox(encode_mask(grid)), box)
        if iou > best_iou:
            best_iou, best_grid = iou, grid
    fallback = best_grid is None
    if fallback:
        ys = (np.arange(view.height) + 0.5)[:, None]
        xs = (np.arange(view.width) + 0.5)[None, :]
        best_grid = (ys >= box.y) & (ys < box.bottom) & (xs >= box.x) & (xs < box.right)
        if not best_grid.any():
            r = min(int(box.y + box.h / 2), view.height - 1)
            c = min(int(box.x + box.w / 2), view.width - 1)
            best_grid[r, c] = True
    emb = pooled_embedding(fm, best_grid)
    token = QueryToken(
        embedding=emb,
        origin="original",
        source_frame=view.frame_index,
        sim_to_original=1.0,
        area_fraction=box.area / (view.width * view.height),
        blur_variance=_blur_of_box(view, box),
    )
    return token, fallback


def tokenize_query_from_tokens(
    token_set: VideoTokenSet,
    frame_index: int,
    box: BBox,
    blur_variance: float = float("inf"),
) -> tuple[QueryToken, bool]:
    """Query token chosen from prepared tokens (store-backed runs).

    Picks the region with maximal box IoU; with zero overlap everywhere,
    falls back to the nearest region center and reports it.
    """
    if not (0 <= frame_index < token_set.frame_count):
        raise ValueError(f"query frame {frame_index} outside [0, {token_set.frame_count})")
    box = box.clamp(token_set.width, token_set.height)
    candidates = token_set.frame_tokens(frame_index)
    if not candidates:
        raise BackendError(f"no region tokens on query frame {frame_index}")
    best = max(candidates, key=lambda tok: box_iou(tok.bbox, box))
    fallback = box_iou(best.bbox, box) == 0.0
    if fallback:
        bx, by = box.center

        def dist(tok: RegionToken) -> float:
            cx, cy = tok.bbox.center
            return (cx - bx) ** 2 + (cy - by) ** 2

        best = min(candidates, key=dist)
    token = QueryToken(
        embedding=np.asarray(best.embedding, dtype=np.float64),
        origin="original",
        source_frame=frame_index,
        sim_to_original=1.0,
        area_fraction=box.area / (token_set.width * token_set.height),
        blur_variance=blur_variance,
    )
    return token, fallback
