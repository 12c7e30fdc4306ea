"""Template tracking over PNG frames, written out as tracks.jsonl.

The classical tracker correlates a grayscale template around the previous
position and re-fits the box to the foreground inside each match, so boxes
stay glued to the object instead of drifting with correlation noise. One
call produces one JSONL record; callers append per-query records into a
single file next to the token store.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from vql_bridge.segment import ContourSegmenter
from vql_bridge.store_io import _atomic_write, list_frames, read_image, tight_box

_LUMA = np.array([0.299, 0.587, 0.114])

_DIRECTIONS = ("forward", "backward", "both")


def _gray(img: np.ndarray) -> np.ndarray:
    return np.asarray(img, dtype=np.float64) @ _LUMA


class NccTracker:
    """Normalized cross-correlation search, seeded from one box.

    The template is the seed box plus a ring of context pixels — a box drawn
    tight around a flat-colored object carries no gradient of its own, the
    object/background edge does. It never updates; rigid targets stay locked
    and a deforming one drops below min_corr and ends the track rather than
    drifting onto the background. A featureless seed (std below min_std —
    e.g. a box over empty background) cannot be correlated and yields just
    the seed box. Ties in the correlation surface resolve to the first
    cell in row-major order, so runs are deterministic.
    """

    tracker_id = "ncc-v1"

    def __init__(
        self,
        search_radius: int = 16,
        min_corr: float = 0.6,
        min_std: float = 1.0,
        context: int = 4,
        refine_tau: float = 24.0,
        refine_pad: int = 3,
    ):
        self.search_radius = int(search_radius)
        self.min_corr = float(min_corr)
        self.min_std = float(min_std)
        self.context = int(context)
        self.refine_pad = int(refine_pad)
        self._seg = ContourSegmenter(tau=refine_tau)

    def track(
        self,
        frames: list[np.ndarray],
        seed_frame: int,
        seed_box: tuple[float, float, float, float],
        direction: str = "both",
    ) -> list[tuple[int, tuple[float, float, float, float]]]:
        """(frame, (x, y, w, h)) for the contiguous run around the seed."""
        if direction not in _DIRECTIONS:
            raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
        if not 0 <= seed_frame < len(frames):
            raise ValueError(f"seed frame {seed_frame} out of range for {len(frames)} frames")
        h, w = frames[seed_frame].shape[:2]
        x, y, bw, bh = (float(v) for v in seed_box)
        out = [(seed_frame, (x, y, bw, bh))]
        ix0, iy0 = max(int(round(x)), 0), max(int(round(y)), 0)
        ix1, iy1 = min(int(round(x + bw)), w), min(int(round(y + bh)), h)
        if ix1 - ix0 < 2 or iy1 - iy0 < 2:
            return out
        ex0, ey0 = max(ix0 - self.context, 0), max(iy0 - self.context, 0)
        ex1, ey1 = min(ix1 + self.context, w), min(iy1 + self.context, h)
        template = _gray(frames[seed_frame])[ey0:ey1, ex0:ex1]
        if template.std() < self.min_std:
            return out
        tz = template - template.mean()
        tnorm = float(np.sqrt((tz * tz).sum()))
        th, tw = template.shape
        ox, oy = ix0 - ex0, iy0 - ey0  # seed box offset inside the template
        bw_i, bh_i = ix1 - ix0, iy1 - iy0
        for step in (1, -1):
            if (step, direction) in ((1, "backward"), (-1, "forward")):
                continue
            px, py = ex0, ey0
            fi = seed_frame + step
            while 0 <= fi < len(frames):
                hit = self._match(_gray(frames[fi]), tz, tnorm, px, py, th, tw)
                if hit is None or hit[0] < self.min_corr:
                    break
                _, px, py = hit
                out.append((fi, self._refit(frames[fi], px + ox, py + oy, bh_i, bw_i)))
                fi += step
        return sorted(out)

    def _match(self, g, tz, tnorm, px, py, th, tw):
        """Best (score, x, y) for the template inside the search window."""
        r = self.search_radius
        y0, x0 = max(py - r, 0), max(px - r, 0)
        y1, x1 = min(py + r + th, g.shape[0]), min(px + r + tw, g.shape[1])
        if y1 - y0 < th or x1 - x0 < tw:
            return None
        patches = sliding_window_view(g[y0:y1, x0:x1], (th, tw))
        cross = np.einsum("ijkl,kl->ij", patches, tz)
        sums = patches.sum(axis=(2, 3))
        var = np.einsum("ijkl,ijkl->ij", patches, patches) - sums * sums / (th * tw)
        den = np.sqrt(np.maximum(var, 0.0)) * tnorm
        ncc = np.where(den > 1e-12, cross / np.maximum(den, 1e-12), -1.0)
        my, mx = divmod(int(np.argmax(ncc)), ncc.shape[1])
        return float(ncc[my, mx]), x0 + mx, y0 + my

    def _refit(self, img, bx, by, bh, bw):
        """Tight foreground box inside the padded match, else the match box."""
        fg = self._seg.foreground(img)
        pad = self.refine_pad
        x0, y0 = max(bx - pad, 0), max(by - pad, 0)
        region = fg[y0 : min(by + bh + pad, fg.shape[0]), x0 : min(bx + bw + pad, fg.shape[1])]
        if not region.any():
            return (float(bx), float(by), float(bw), float(bh))
        rx, ry, rw, rh = tight_box(region)
        return (rx + x0, ry + y0, rw, rh)


def bridge_track(
    frames_dir: str | Path,
    seed_frame: int,
    seed_box: tuple[float, float, float, float],
    direction: str = "both",
    out_path: str | Path | None = None,
    *,
    tracker=None,
    append: bool = False,
) -> dict:
    """Track from one seed over a frame directory and write tracks.jsonl.

    Writes next to the frames directory unless out_path says otherwise;
    append=True adds a record to an existing file instead of replacing it.
    Returns the record that was written.
    """
    frames = [read_image(p) for p in list_frames(frames_dir)]
    tracker = tracker if tracker is not None else NccTracker()
    boxes = tracker.track(frames, int(seed_frame), seed_box, direction)
    record = {
        "seed_frame": int(seed_frame),
        "direction": direction,
        "boxes": [
            {"frame": fi, "x": bx, "y": by, "w": bw, "h": bh}
            for fi, (bx, by, bw, bh) in boxes
        ],
    }
    out = Path(out_path) if out_path is not None else Path(frames_dir).parent / "tracks.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    line = json.dumps(record, separators=(",", ":")) + "\n"
    if append and out.exists():
        with open(out, "a", encoding="utf-8") as fh:
            fh.write(line)
    else:
        _atomic_write(out, line.encode())
    return record
