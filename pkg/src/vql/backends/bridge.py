"""Backends over artifacts another process produced offline.

A bridge export is a TokenStore directory, a directory of PNG frames named
by frame index, and optionally a tracks.jsonl of pre-computed track
segments. These adapters expose all three through the same interfaces as
live backends, so the pipeline runs unchanged — except that nobody can
re-extract features for crop views, which the bundle advertises via
``supports_views=False``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from vql.backends import BackendBundle, FrameView, TrackerBackend
from vql.core import BBox, BackendError, EngineConfig, SchemaError
from vql.images import crop_view, read_png
from vql.store import TokenStore, load_store
from vql.tokens import VideoTokenSet
from vql.track import TokenTracker

TRACKS_NAME = "tracks.jsonl"
FRAME_PATTERN = "{:05d}.png"

_FRAME_RE = re.compile(r"^(\d{5})\.png$")


class PngFrameSource:
    """FrameSource over a directory of ``00000.png``-style frames."""

    def __init__(self, frames_dir: str | Path, video_id: str, fps: float):
        self.video_id = video_id
        self.fps = fps
        self._dir = Path(frames_dir)
        if not self._dir.is_dir():
            raise BackendError(f"frames directory not found: {self._dir}")
        indices = sorted(
            int(m.group(1))
            for p in self._dir.iterdir()
            if (m := _FRAME_RE.match(p.name))
        )
        if not indices:
            raise BackendError(f"no frame PNGs in {self._dir}")
        for want, got in enumerate(indices):
            if got != want:
                raise BackendError(
                    f"frame file missing: {self._dir / FRAME_PATTERN.format(want)}"
                )
        self.frame_count = len(indices)
        first = read_png(self._dir / FRAME_PATTERN.format(0))
        self.height, self.width = int(first.shape[0]), int(first.shape[1])
        self._cache: dict[int, np.ndarray] = {0: first}

    def pixels(self, frame_index: int) -> np.ndarray:
        if not 0 <= frame_index < self.frame_count:
            raise BackendError(f"frame index {frame_index} out of range")
        cached = self._cache.get(frame_index)
        if cached is not None:
            return cached
        img = read_png(self._dir / FRAME_PATTERN.format(frame_index))
        if img.shape[:2] != (self.height, self.width):
            raise BackendError(
                f"frame {frame_index} is {img.shape[1]}x{img.shape[0]}, "
                f"expected {self.width}x{self.height}"
            )
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[frame_index] = img
        return img

    def view(self, frame_index: int, rect: BBox) -> FrameView:
        pix = self.pixels(frame_index)
        if (rect.x, rect.y, rect.w, rect.h) == (0.0, 0.0, float(self.width), float(self.height)):
            return FrameView(frame_index, pix, rect, 1.0)
        out = crop_view(pix, rect, self.height, self.width)
        return FrameView(frame_index, out, rect, self.width / rect.w)


def load_tracks(path: str | Path) -> list[dict]:
    """Parse and validate a tracks.jsonl file."""
    records: list[dict] = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}:{ln}: not valid JSON: {exc}") from exc
        for key in ("seed_frame", "direction", "boxes"):
            if key not in rec:
                raise SchemaError(f"{path}:{ln}: missing {key}")
        if rec["direction"] not in ("forward", "backward", "both"):
            raise SchemaError(f"{path}:{ln}: bad direction {rec['direction']!r}")
        if not rec["boxes"]:
            raise SchemaError(f"{path}:{ln}: empty boxes")
        for b in rec["boxes"]:
            if not all(k in b for k in ("frame", "x", "y", "w", "h")):
                raise SchemaError(f"{path}:{ln}: box entry needs frame,x,y,w,h")
        records.append(rec)
    return records


class BridgeTracker:
    """TrackerBackend replaying track segments from tracks.jsonl.

    Records sharing a seed frame (a forward and a backward pass) are merged.
    When no record covers the requested seed, the seed box alone is
    returned — the pipeline still yields an answer, just a single-frame one.
    """

    tracker_id = "bridge-tracks-v1"

    def __init__(self, records: list[dict]):
        self._by_seed: dict[int, dict[int, BBox]] = {}
        for rec in records:
            merged = self._by_seed.setdefault(int(rec["seed_frame"]), {})
            for b in rec["boxes"]:
                merged[int(b["frame"])] = BBox(
                    float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"])
                )

    def track(
        self,
        seed_frame: int,
        seed_box: BBox,
        seed_embedding: np.ndarray | None,
        lo: int,
        hi: int,
    ) -> list[tuple[int, BBox]]:
        merged = self._by_seed.get(seed_frame)
        if merged is None:
            return [(seed_frame, seed_box)]
        boxes = {f: b for f, b in merged.items() if lo <= f <= hi}
        boxes.setdefault(seed_frame, seed_box)
        # keep the contiguous run around the seed; stray frames from a
        # malformed file must not fabricate a longer track
        out = [(seed_frame, boxes[seed_frame])]
        for step in (1, -1):
            fi = seed_frame + step
            while fi in boxes:
                out.append((fi, boxes[fi]))
                fi += step
        return sorted(out)


def resolve_frames_dir(store_dir: str | Path, store: TokenStore) -> Path | None:
    if store.frames_dir is None:
        return None
    p = Path(store.frames_dir)
    return p if p.is_absolute() else (Path(store_dir) / p).resolve()


def bridge_bundle(
    store_dir: str | Path, config: EngineConfig
) -> tuple[BackendBundle, VideoTokenSet]:
    """Open a bridge export: stored tokens, PNG frames, optional tracks.

    Falls back to the builtin token tracker when the export carries no
    tracks.jsonl. Raises BackendError when the manifest names no frames
    directory — the pipeline needs pixels for the blur gate and overlays.
    """
    store = load_store(store_dir)
    ts = store.token_set
    frames_dir = resolve_frames_dir(store_dir, store)
    if frames_dir is None:
        raise BackendError(f"store {store_dir} names no frames_dir")
    frames = PngFrameSource(frames_dir, ts.video_id, ts.fps)
    if frames.frame_count != ts.frame_count:
        raise BackendError(
            f"store has {ts.frame_count} frames but {frames_dir} holds {frames.frame_count}"
        )
    tracks_path = Path(store_dir) / TRACKS_NAME
    if tracks_path.exists():
        tracker: TrackerBackend = BridgeTracker(load_tracks(tracks_path))
    else:
        tracker = TokenTracker(ts, config)
    bundle = BackendBundle(
        frames=frames,
        segmenter=None,
        extractor=None,
        tracker=tracker,
        supports_views=False,
    )
    return bundle, ts
