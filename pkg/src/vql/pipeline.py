"""End-to-end query localization: search, refine, track, then re-iterate.

The first pass answers with the latest credible sighting of the query
object. A single re-iteration then widens the query pool with appearance
samples drawn from that track and re-searches the frames after it, so an
appearance change between the query crop and the object's final occurrence
can still be bridged. The update is accepted only when its score holds up
against the previous answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vql.backends import BackendBundle, FrameView
from vql.core import (
    BBox,
    BackendError,
    EngineConfig,
    LocalizationRequest,
    QueryToken,
    ResponseTrack,
    box_iou,
)
from vql.images import laplacian_variance
from vql.refine import compute_crop, refine_candidates, refine_query
from vql.search import search
from vql.tokens import (
    VideoTokenSet,
    _blur_of_box,
    tokenize_query,
    tokenize_query_from_tokens,
)
from vql.track import TokenTracker


@dataclass(frozen=True)
class LocalizationResult:
    """Final track plus a human-readable trace of how it was produced."""

    track: ResponseTrack
    events: tuple[str, ...]

    @property
    def score(self) -> float:
        return self.track.score


def result_record(result: LocalizationResult, request: LocalizationRequest) -> dict:
    """JSON-ready record for one query, in results-file schema."""
    return {
        "query_id": request.query_id,
        "score": float(result.score),
        "track": [
            {"frame": f, "x": b.x, "y": b.y, "w": b.w, "h": b.h}
            for f, b in result.track.boxes
        ],
    }


def _crop_blur(bundle: BackendBundle, frame_index: int, box: BBox, config: EngineConfig) -> float:
    """Sharpness of the object-centric crop, measured at source resolution.

    Resampling the crop before measuring would smooth the very statistic the
    gate exists to read, so the window is sliced straight from the frame.
    """
    frames = bundle.frames
    if not config.blur_on_crop:
        view = FrameView(
            frame_index, frames.pixels(frame_index), BBox(0, 0, frames.width, frames.height), 1.0
        )
        return _blur_of_box(view, box)
    rect = compute_crop(box, frames.width, frames.height, config)
    pix = frames.pixels(frame_index)
    y0, y1 = int(math.floor(rect.y)), int(math.ceil(rect.bottom))
    x0, x1 = int(math.floor(rect.x)), int(math.ceil(rect.right))
    window = pix[max(y0, 0) : y1, max(x0, 0) : x1]
    if window.shape[0] < 3 or window.shape[1] < 3:
        return float("inf")
    return laplacian_variance(window)


def expand_queries(
    bundle: BackendBundle,
    token_set: VideoTokenSet,
    track: ResponseTrack,
    original: QueryToken,
    config: EngineConfig,
) -> list[QueryToken]:
    """Appearance samples along a track, gated for trustworthiness.

    Each track frame contributes its stored region token (best box overlap
    with the track box). A sample joins the pool only if it still resembles
    the original query (t_q), is not too small to be informative, and is
    sharp enough that its embedding reflects the object rather than motion
    blur.
    """
    orig_u = np.asarray(original.embedding, dtype=np.float64)
    orig_u = orig_u / np.linalg.norm(orig_u)
    frame_area = float(bundle.frames.width * bundle.frames.height)
    out: list[QueryToken] = []
    for frame_index, box in track.boxes:
        start, end = (int(v) for v in token_set.frame_ranges[frame_index])
        best_ti, best_iou = -1, 0.0
        for ti in range(start, end):
            iou = box_iou(token_set.tokens[ti].bbox, box)
            if iou > best_iou:
                best_ti, best_iou = ti, iou
        if best_ti < 0:
            continue
        emb = np.asarray(token_set.embeddings[best_ti], dtype=np.float64)
        sim = float(np.clip(orig_u @ (emb / np.linalg.norm(emb)), -1.0, 1.0))
        if sim < config.t_q:
            continue
        if box.area / frame_area < config.area_min_fraction:
            continue
        blur = _crop_blur(bundle, frame_index, box, config)
        if blur < config.blur_var_min:
            continue
        out.append(
            QueryToken(
                embedding=token_set.embeddings[best_ti],
                origin="expanded",
                source_frame=frame_index,
                sim_to_original=sim,
                area_fraction=box.area / frame_area,
                blur_variance=blur,
            )
        )
    return out


def _build_query(
    bundle: BackendBundle, token_set: VideoTokenSet, request: LocalizationRequest
) -> tuple[QueryToken | None, bool]:
    if bundle.supports_views and bundle.segmenter is not None and bundle.extractor is not None:
        frames = bundle.frames
        view = frames.view(request.query_frame, BBox(0, 0, frames.width, frames.height))
        return tokenize_query(view, request.query_box, bundle.segmenter, bundle.extractor)
    try:
        return tokenize_query_from_tokens(token_set, request.query_frame, request.query_box)
    except BackendError:
        return None, True


def _last_resort(request: LocalizationRequest, events: list[str]) -> LocalizationResult:
    events.append("fallback: no usable evidence; answering with the query box itself")
    track = ResponseTrack(boxes=((request.query_frame, request.query_box),), score=0.0)
    return LocalizationResult(track=track, events=tuple(events))


def relocalize(
    bundle: BackendBundle,
    token_set: VideoTokenSet,
    tracker,
    pool: list[QueryToken],
    prev: ResponseTrack,
    config: EngineConfig,
    hi: int,
    events: list[str],
    refine: bool = True,
) -> ResponseTrack:
    """One search over the frames after the current answer.

    The previous track is kept unless the new candidate's score holds up at
    ``update_ratio`` of the old one — a later sighting must be nearly as
    credible to displace an existing answer.
    """
    lo = prev.end + 1
    if lo > hi:
        events.append(f"relocate: no frames after {prev.end}; keeping track")
        return prev
    cands = search(token_set, pool, config, lo=lo, hi=hi)
    events.append(f"relocate: {len(cands)} candidate(s) in [{lo}, {hi}]")
    if refine:
        cands = refine_candidates(cands, bundle, pool, config, initial_pass=False)
        events.append(f"relocate-refine: {len(cands)} kept")
    if not cands:
        return prev
    seed = max(cands, key=lambda c: c.frame_index)
    floor = config.update_ratio * prev.score
    if seed.score < floor:
        events.append(
            f"relocate: rejected frame {seed.frame_index} "
            f"(score {seed.score:.6f} < {floor:.6f})"
        )
        return prev
    boxes = tracker.track(seed.frame_index, seed.bbox, seed.embedding, lo, hi)
    events.append(
        f"relocate: accepted frame {seed.frame_index} score {seed.score:.6f}; "
        f"track [{boxes[0][0]}, {boxes[-1][0]}]"
    )
    return ResponseTrack(boxes=tuple(boxes), score=seed.score)


def localize(
    bundle: BackendBundle,
    token_set: VideoTokenSet,
    request: LocalizationRequest,
    config: EngineConfig,
    refine: bool = True,
    reiterate: bool = True,
) -> LocalizationResult:
    """Answer one visual query against a prepared token set."""
    events: list[str] = []
    hi = min(request.query_time, token_set.frame_count - 1)
    if hi < 0 or not len(token_set.tokens):
        return _last_resort(request, events)

    query, degraded = _build_query(bundle, token_set, request)
    if query is None:
        return _last_resort(request, events)
    events.append(f"query: tokenized at frame {request.query_frame} (degraded={degraded})")
    pool = [query]
    if refine:
        refined_q = refine_query(bundle, request.query_frame, request.query_box, query, config)
        if refined_q is not None and refined_q.sim_to_original >= config.t_q:
            pool.append(refined_q)
            events.append(f"query-refine: added (sim {refined_q.sim_to_original:.6f})")

    cands = search(token_set, pool, config, lo=0, hi=hi)
    events.append(f"search: {len(cands)} candidate(s) in [0, {hi}]")
    if refine:
        cands = refine_candidates(cands, bundle, pool, config, initial_pass=True)
        if bundle.supports_views:
            events.append(f"refine: {len(cands)} kept")
        else:
            events.append(f"refine: skipped (no crop views); {len(cands)} kept as-is")
    if not cands:
        return _last_resort(request, events)

    tracker = bundle.tracker if bundle.tracker is not None else TokenTracker(token_set, config)
    seed = max(cands, key=lambda c: c.frame_index)
    boxes = tracker.track(seed.frame_index, seed.bbox, seed.embedding, 0, hi)
    track = ResponseTrack(boxes=tuple(boxes), score=seed.score)
    events.append(
        f"track: seed frame {seed.frame_index} score {seed.score:.6f}; "
        f"span [{track.start}, {track.end}]"
    )

    if reiterate:
        expanded = expand_queries(bundle, token_set, track, query, config)
        events.append(f"expand: {len(expanded)} track queries kept")
        track = relocalize(
            bundle, token_set, tracker, pool + expanded, track, config, hi, events, refine=refine
        )

    return LocalizationResult(track=track, events=tuple(events))
