"""Candidate refinement: re-examine each search hit through a zoomed crop.

Peaks found at native resolution inherit whatever the frame-level tokenizer
saw — partial masks, features bleeding across neighbouring objects. Cutting
an object-centric crop, re-segmenting, and re-pooling replaces each
candidate's box and embedding with a close-up estimate before the similarity
filter decides which peaks survive.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from vql.backends import BackendBundle
from vql.core import (
    BBox,
    EngineConfig,
    QueryToken,
    ScoredCandidate,
    box_iou,
    encode_mask,
    tight_bbox,
)
from vql.features import pooled_embedding
from vql.search import max_cosine
from vql.tokens import _blur_of_box


def compute_crop(box: BBox, frame_w: int, frame_h: int, config: EngineConfig) -> BBox:
    """Object-centric crop rectangle for a zoomed second look.

    Zoom is chosen so the box fills ``crop_target_occupancy`` of the crop's
    larger relative side, clamped to [1, zoom_cap]; the crop keeps the frame
    aspect ratio, centers on the box, and is translated to stay inside the
    frame.
    """
    occupancy = max(box.w / frame_w, box.h / frame_h)
    zoom = min(max(config.crop_target_occupancy / occupancy, 1.0), config.zoom_cap)
    cw = frame_w / zoom
    ch = frame_h / zoom
    cx, cy = box.center
    x = min(max(cx - cw / 2.0, 0.0), frame_w - cw)
    y = min(max(cy - ch / 2.0, 0.0), frame_h - ch)
    return BBox(x, y, cw, ch)


def _best_mask(grids, target_view_box: BBox):
    """Mask whose tight box best overlaps the candidate's box, or None."""
    best = None
    best_iou = 0.0
    for grid in grids:
        if not grid.any():
            continue
        tb = tight_bbox(encode_mask(grid))
        iou = box_iou(tb, target_view_box)
        if iou > best_iou:
            best, best_iou = (grid, tb), iou
    return best


def refine_candidate(
    cand: ScoredCandidate, bundle: BackendBundle, config: EngineConfig
) -> ScoredCandidate:
    """Re-tokenize one candidate through its crop.

    Returns the candidate with a refined box and embedding, or the original
    marked ``refine_failed`` when no crop region overlaps it.
    """
    frames = bundle.frames
    rect = compute_crop(cand.bbox, frames.width, frames.height, config)
    view = frames.view(cand.frame_index, rect)
    grids = bundle.segmenter.segment(view)
    hit = _best_mask(grids, view.to_view_coords(cand.bbox))
    if hit is None:
        return replace(cand, refine_failed=True)
    grid, view_box = hit
    fm = bundle.extractor.extract(view)
    embedding = pooled_embedding(fm, grid)
    bbox = view.to_frame_coords(view_box).clamp(frames.width, frames.height)
    return replace(cand, bbox=bbox, embedding=embedding, refined=True)


def refine_candidates(
    cands: list[ScoredCandidate],
    bundle: BackendBundle,
    queries,
    config: EngineConfig,
    initial_pass: bool,
) -> list[ScoredCandidate]:
    """Refine, rescore against the query pool, and filter at t_sim.

    Candidates whose refinement failed keep the score that selected them and
    bypass the filter. If every refined candidate falls below t_sim on the
    initial pass, the best original candidate passes through unrefined so
    the first localization always has a seed; later passes return [] and the
    caller keeps its previous answer instead.
    """
    if not cands:
        return []
    if not bundle.supports_views or bundle.segmenter is None or bundle.extractor is None:
        return [replace(c, refine_failed=True) for c in cands]
    out: list[ScoredCandidate] = []
    for cand in cands:
        ref = refine_candidate(cand, bundle, config)
        if ref.refined:
            score = float(max_cosine(ref.embedding[None, :], _query_matrix(queries))[0])
            ref = replace(ref, score=score)
        out.append(ref)
    kept = [c for c in out if c.refine_failed or c.score >= config.t_sim]
    if not kept and initial_pass:
        return [max(cands, key=lambda c: (c.score, c.frame_index))]
    kept.sort(key=lambda c: (-c.score, -c.frame_index))
    return kept


def _query_matrix(queries) -> np.ndarray:
    return np.stack([np.asarray(q.embedding, dtype=np.float64) for q in queries])


def refine_query(
    bundle: BackendBundle,
    frame_index: int,
    box: BBox,
    original: QueryToken,
    config: EngineConfig,
) -> QueryToken | None:
    """Zoomed re-tokenization of the visual query itself.

    The result joins the query pool alongside the original (it can only be
    as trustworthy as a derived query, hence origin "expanded"). Returns
    None when the backend cannot serve crops or nothing overlaps the box.
    """
    if not bundle.supports_views or bundle.segmenter is None or bundle.extractor is None:
        return None
    frames = bundle.frames
    box = box.clamp(frames.width, frames.height)
    rect = compute_crop(box, frames.width, frames.height, config)
    view = frames.view(frame_index, rect)
    hit = _best_mask(bundle.segmenter.segment(view), view.to_view_coords(box))
    if hit is None:
        return None
    grid, view_box = hit
    embedding = pooled_embedding(bundle.extractor.extract(view), grid)
    sim = float(
        np.clip(max_cosine(embedding[None, :], _query_matrix([original]))[0], -1.0, 1.0)
    )
    frame_box = view.to_frame_coords(view_box).clamp(frames.width, frames.height)
    full_view = frames.view(frame_index, BBox(0, 0, frames.width, frames.height))
    return QueryToken(
        embedding=embedding.astype(np.float32),
        origin="expanded",
        source_frame=frame_index,
        sim_to_original=sim,
        area_fraction=frame_box.area / (frames.width * frames.height),
        blur_variance=_blur_of_box(full_view, frame_box),
    )
