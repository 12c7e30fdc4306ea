"""Greedy bidirectional tracking over the region-token table.

No pixel-level tracker is required: each step picks the token in the next
frame that best combines embedding similarity to the seed with box overlap
against the previous step, and stops when that combined score falls under
the configured floor. Track boxes are therefore always region tight-boxes.
"""

from __future__ import annotations

import numpy as np

from vql.core import BBox, EngineConfig, box_iou
from vql.tokens import VideoTokenSet


class TokenTracker:
    """TrackerBackend over a prepared token set."""

    tracker_id = "token-greedy-v1"

    def __init__(self, token_set: VideoTokenSet, config: EngineConfig):
        self._ts = token_set
        self._cfg = config

    def _best(self, frame_index: int, prev_box: BBox, seed_u: np.ndarray | None):
        """Highest combined score in the frame; ties keep the lowest region id."""
        cfg = self._cfg
        best = None
        start, end = (int(v) for v in self._ts.frame_ranges[frame_index])
        for ti in range(start, end):
            tok = self._ts.tokens[ti]
            sim = 0.0
            if seed_u is not None:
                emb = np.asarray(self._ts.embeddings[ti], dtype=np.float64)
                sim = float(seed_u @ (emb / np.linalg.norm(emb)))
            combined = cfg.track_w_sim * sim + cfg.track_w_iou * box_iou(tok.bbox, prev_box)
            if best is None or combined > best[0]:
                best = (combined, tok.bbox)
        return best

    def track(
        self,
        seed_frame: int,
        seed_box: BBox,
        seed_embedding: np.ndarray | None,
        lo: int,
        hi: int,
    ) -> list[tuple[int, BBox]]:
        ts = self._ts
        lo = max(lo, 0)
        hi = min(hi, ts.frame_count - 1)
        if not lo <= seed_frame <= hi:
            raise ValueError(f"seed frame {seed_frame} outside track bounds [{lo}, {hi}]")
        seed_u = None
        if seed_embedding is not None:
            seed_u = np.asarray(seed_embedding, dtype=np.float64)
            seed_u = seed_u / np.linalg.norm(seed_u)
        # snap the seed onto the frame's best-matching token so every box in
        # the track comes from the same table; keep the raw box if nothing
        # in the seed frame qualifies
        hit = self._best(seed_frame, seed_box, seed_u)
        anchor = hit[1] if hit is not None and hit[0] >= self._cfg.track_stop else seed_box
        boxes: dict[int, BBox] = {seed_frame: anchor}
        for step in (1, -1):
            prev = anchor
            fi = seed_frame + step
            while lo <= fi <= hi:
                nxt = self._best(fi, prev, seed_u)
                if nxt is None or nxt[0] < self._cfg.track_stop:
                    break
                boxes[fi] = nxt[1]
                prev = nxt[1]
                fi += step
        return sorted(boxes.items())
