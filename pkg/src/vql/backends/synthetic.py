"""Seeded synthetic videos with exactly known geometry and embeddings.

A scenario plants one target object and a set of distractors in
non-overlapping horizontal lanes. Every object carries a unit embedding
drawn from an orthonormal basis, optionally perturbed per frame; masks are
rectangles or inscribed ellipses rasterized by the pixel-center rule. The
same geometry drives the segmenter, the extractor, and the rendered pixels,
so ground-truth response tracks are known exactly and a zero-noise pipeline
run can be checked for bit-level agreement.

Two behaviors exist to stress the refinement stage. A "bleed" distractor
mimics the target's embedding in full-frame feature maps but reveals its true
(orthogonal) embedding in zoomed crop views, the way feature bleed between
neighbouring regions disappears in an object-centric crop. A "part reveal"
target is under-segmented at full frame (mask covers only part of the object)
and fully segmented in zoomed views.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Iterable

import numpy as np

from vql.backends import FrameView
from vql.core import BBox, SchemaError
from vql.images import box_blur, crop_view

# Crop magnification at which zoom-dependent behaviors (bleed reveal,
# part-mask completion) switch over.
REVEAL_ZOOM = 1.25

_PALETTE = (
    (214, 69, 65),
    (68, 108, 179),
    (77, 175, 124),
    (244, 179, 80),
    (155, 89, 182),
    (52, 172, 224),
    (240, 98, 146),
    (149, 165, 166),
    (121, 85, 72),
    (0, 150, 136),
)
_BACKGROUND_COLOR = (30, 30, 34)
_DITHER = 6  # +- amplitude keeping flat regions comfortably non-blurry


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs for the scenario generator. JSON-serializable field-for-field."""

    frame_count: int = 60
    width: int = 96
    height: int = 72
    dim: int = 32
    feature_scale: int = 1
    num_distractors: int = 3
    appearances: int = 2
    noise: float = 0.0
    drift_angle: float = 0.0  # degrees; target rotates to this over its first span
    final_angle: float = 0.0  # degrees; target's whole last span sits at this angle
    bleed_distractor: bool = False
    bleed_cos: float = 0.95
    part_reveal: bool = False
    blur_final: bool = False
    background_mask: bool = False
    fps: float = 5.0

    def __post_init__(self) -> None:
        if self.frame_count < 0:
            raise ValueError("frame_count must be >= 0")
        if self.width < 8 or self.height < 8:
            raise ValueError("frame dims must be at least 8x8")
        if self.feature_scale < 1:
            raise ValueError("feature_scale must be >= 1")
        # appearances=0 plants no target at all (empty annotation set)
        if self.num_distractors < 0 or self.appearances < 0:
            raise ValueError("num_distractors >= 0 and appearances >= 0 required")
        needed = 2 * (1 + self.num_distractors) + 1
        if self.dim < needed:
            raise ValueError(f"dim must be >= {needed} for an orthonormal basis")
        if not (0.0 <= self.noise < 1.0):
            raise ValueError("noise must lie in [0, 1)")
        if not (-1.0 < self.bleed_cos < 1.0):
            raise ValueError("bleed_cos must lie in (-1, 1)")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ScenarioParams":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown scenario params: {sorted(unknown)}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"invalid scenario params: {exc}") from exc


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    role: str  # "target" | "distractor" | "bleed"
    shape: str  # "rect" | "ellipse"
    color: tuple[int, int, int]
    spans: tuple[tuple[int, int], ...]
    boxes: dict  # frame -> BBox, full object extent
    embeddings: dict  # frame -> (d,) float64, full-frame embedding
    crop_embeddings: dict | None  # set on bleed objects: embedding under zoom
    part_boxes: dict | None  # set on part-reveal objects: full-frame mask extent

    def visible(self, t: int) -> bool:
        return t in self.boxes

    def mask_box(self, t: int, zoom: float) -> BBox:
        if self.part_boxes is not None and zoom <= REVEAL_ZOOM:
            return self.part_boxes[t]
        return self.boxes[t]

    def embedding_for(self, t: int, zoom: float) -> np.ndarray:
        if self.crop_embeddings is not None and zoom > REVEAL_ZOOM:
            return self.crop_embeddings[t]
        return self.embeddings[t]


@dataclass(frozen=True)
class SyntheticScenario:
    seed: int
    params: ScenarioParams
    video_id: str
    objects: tuple[SceneObject, ...]
    background_vec: np.ndarray
    blur_frames: frozenset

    @property
    def target(self) -> SceneObject:
        return self.objects[0]


def _orthonormal_basis(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    mat = rng.normal(size=(dim, count))
    q, r = np.linalg.qr(mat)
    # Fix signs so the basis is a deterministic function of the input matrix.
    q = q * np.sign(np.diag(r))[None, :]
    return q.T  # (count, dim)


def _perturb(rng: np.random.Generator, base: np.ndarray, noise: float) -> np.ndarray:
    """Unit vector with cos(base, result) >= 1 - noise^2 / 2."""
    if noise == 0.0:
        return base.copy()
    p = rng.normal(size=base.shape)
    p -= np.dot(p, base) * base  # orthogonal component only
    norm = float(np.linalg.norm(p))
    if norm == 0.0:
        return base.copy()
    mag = noise * rng.uniform(0.0, 1.0)
    v = base + (mag / norm) * p
    return v / np.linalg.norm(v)


def _spans(rng: np.random.Generator, count: int, lo: int, hi: int) -> list[tuple[int, int]]:
    """count non-touching [s, e] spans inside [lo, hi], chronological."""
    total = hi - lo + 1
    lengths = rng.integers(5, 11, size=count)
    gaps = rng.integers(3, 8, size=count)  # gap before each span
    while int(lengths.sum() + gaps.sum()) > total:
        lengths = np.maximum(lengths - 1, 3)
        gaps = np.maximum(gaps - 1, 2)
        if int(lengths.sum() + gaps.sum()) <= total:
            break
        if lengths.max() == 3 and gaps.max() == 2:
            raise ValueError(f"cannot fit {count} spans into [{lo}, {hi}]")
    slack = total - int(lengths.sum() + gaps.sum())
    extra = rng.integers(0, slack + 1)
    spans = []
    cursor = lo + int(extra)
    for length, gap in zip(lengths.tolist(), gaps.tolist()):
        start = cursor + gap
        spans.append((start, start + length - 1))
        cursor = start + length
    return spans


def _walk_boxes(
    rng: np.random.Generator,
    spans: Iterable[tuple[int, int]],
    lane_y: int,
    lane_h: int,
    width: int,
) -> dict:
    """Integer-coordinate boxes bouncing horizontally inside one lane."""
    boxes: dict = {}
    obj_h = lane_h
    for s, e in spans:
        obj_w = int(rng.integers(8, 15))
        x = int(rng.integers(0, max(width - obj_w, 1)))
        vx = int(rng.choice([-2, -1, 1, 2]))
        for t in range(s, e + 1):
            boxes[t] = BBox(float(x), float(lane_y), float(obj_w), float(obj_h))
            x += vx
            if x < 0:
                x, vx = -x, -vx
            if x + obj_w > width:
                x, vx = 2 * (width - obj_w) - x, -vx
    return boxes


def generate_scenario(seed: int, params: ScenarioParams) -> SyntheticScenario:
    """Deterministically expand (seed, params) into concrete geometry."""
    rng = np.random.default_rng(np.random.SeedSequence([0x5CE11A, seed]))
    n_objects = 1 + params.num_distractors
    basis = _orthonormal_basis(rng, params.dim, 2 * n_objects + 1)
    background_vec = basis[-1]

    lane_h = max((params.height - 2 * (n_objects - 1)) // max(n_objects, 1), 5) if n_objects else 0
    lane_h = min(lane_h, 12)
    if n_objects and (n_objects - 1) * (lane_h + 2) + lane_h > params.height:
        raise ValueError(
            f"{n_objects} object lanes do not fit a frame of height {params.height}"
        )
    objects: list[SceneObject] = []
    last_frame = params.frame_count - 1

    # Target spans stay clear of the tail when a late bleed window is needed.
    target_hi = last_frame - 16 if params.bleed_distractor else last_frame
    target_spans = _spans(rng, params.appearances, 0, max(target_hi, params.appearances * 9))
    target_spans = [(s, min(e, last_frame)) for s, e in target_spans if s <= last_frame]

    for idx in range(n_objects):
        lane_y = idx * (lane_h + 2)
        role = "target" if idx == 0 else "distractor"
        if idx == 0:
            spans = target_spans
        elif params.bleed_distractor and idx == 1:
            role = "bleed"
            if target_spans and last_frame >= 4:
                s = max(min(target_spans[-1][1] + int(rng.integers(4, 8)), last_frame - 4), 0)
                spans = [(s, min(s + int(rng.integers(5, 10)), last_frame))]
            else:
                spans = []
        else:
            spans = [(0, last_frame)]
        boxes = _walk_boxes(rng, spans, lane_y, lane_h, params.width)

        u, v = basis[2 * idx], basis[2 * idx + 1]
        angles: dict = {}
        for t in boxes:
            angles[t] = 0.0
        if idx == 0 and spans:
            first_s, first_e = spans[0][0], spans[0][1]
            final_s, final_e = spans[-1][0], spans[-1][1]
            for t in boxes:
                if params.drift_angle and first_s <= t <= first_e and first_e > first_s:
                    angles[t] = params.drift_angle * (t - first_s) / (first_e - first_s)
                if params.final_angle and len(spans) > 1 and final_s <= t <= final_e:
                    angles[t] = params.final_angle
        embeddings = {}
        for t in boxes:
            theta = np.radians(angles[t])
            base_t = np.cos(theta) * u + np.sin(theta) * v
            embeddings[t] = _perturb(rng, base_t, params.noise)

        crop_embeddings = None
        if role == "bleed":
            # Mimic the target at full frame; own (orthogonal) direction in crops.
            tgt_u = basis[0]
            mix = params.bleed_cos * tgt_u + np.sqrt(1.0 - params.bleed_cos**2) * u
            mix /= np.linalg.norm(mix)
            crop_embeddings = dict(embeddings)
            embeddings = {t: _perturb(rng, mix, params.noise) for t in boxes}

        part_boxes = None
        if idx == 0 and params.part_reveal:
            part_boxes = {
                t: BBox(b.x, b.y, b.w, max(b.h / 2.0, 1.0)) for t, b in boxes.items()
            }

        objects.append(
            SceneObject(
                object_id=idx,
                role=role,
                shape="rect" if (idx % 2 == 0) else "ellipse",
                color=_PALETTE[idx % len(_PALETTE)],
                spans=tuple(spans),
                boxes=boxes,
                embeddings=embeddings,
                crop_embeddings=crop_embeddings,
                part_boxes=part_boxes,
            )
        )

    blur_frames: set = set()
    if params.blur_final and objects[0].spans:
        s, e = objects[0].spans[-1]
        blur_frames = set(range(s, e + 1))

    return SyntheticScenario(
        seed=seed,
        params=params,
        video_id=f"synth-{seed:08d}",
        objects=tuple(objects),
        background_vec=background_vec,
        blur_frames=frozenset(blur_frames),
    )


def _raster(box: BBox, shape: str, height: int, width: int, scale: int = 1) -> np.ndarray:
    """Pixel/cell-center rasterization of a box or its inscribed ellipse."""
    ys = (np.arange(height) + 0.5) * scale
    xs = (np.arange(width) + 0.5) * scale
    if shape == "rect":
        row_in = (ys >= box.y) & (ys < box.bottom)
        col_in = (xs >= box.x) & (xs < box.right)
        return row_in[:, None] & col_in[None, :]
    cx, cy = box.center
    rx, ry = box.w / 2.0, box.h / 2.0
    dx = (xs[None, :] - cx) / rx
    dy = (ys[:, None] - cy) / ry
    return dx * dx + dy * dy <= 1.0


def render_frame(scenario: SyntheticScenario, t: int) -> np.ndarray:
    """Draw frame t: flat-colored objects over a dithered background."""
    p = scenario.params
    img = np.empty((p.height, p.width, 3), dtype=np.float64)
    img[:] = _BACKGROUND_COLOR
    for obj in scenario.objects:
        if not obj.visible(t):
            continue
        grid = _raster(obj.boxes[t], obj.shape, p.height, p.width)
        img[grid] = obj.color
    dither_rng = np.random.default_rng(np.random.SeedSequence([0xD17E4, scenario.seed, t]))
    img += dither_rng.integers(-_DITHER, _DITHER + 1, size=img.shape)
    out = np.clip(img, 0, 255).astype(np.uint8)
    if t in scenario.blur_frames:
        out = box_blur(out, passes=4)
    return out


class SyntheticFrameSource:
    """FrameSource over a scenario; renders lazily with a small cache."""

    def __init__(self, scenario: SyntheticScenario):
        self._scenario = scenario
        self._cache: dict[int, np.ndarray] = {}
        p = scenario.params
        self.video_id = scenario.video_id
        self.width = p.width
        self.height = p.height
        self.frame_count = p.frame_count
        self.fps = p.fps

    def pixels(self, frame_index: int) -> np.ndarray:
        if not (0 <= frame_index < self.frame_count):
            raise IndexError(f"frame {frame_index} outside [0, {self.frame_count})")
        if frame_index not in self._cache:
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[frame_index] = render_frame(self._scenario, frame_index)
        return self._cache[frame_index]

    def view(self, frame_index: int, rect: BBox) -> FrameView:
        px = self.pixels(frame_index)
        if rect.x == 0 and rect.y == 0 and rect.w == self.width and rect.h == self.height:
            return FrameView(frame_index, px, rect, 1.0)
        zoom = self.width / rect.w
        return FrameView(frame_index, crop_view(px, rect, self.height, self.width), rect, zoom)


class SyntheticSegmenter:
    """Emits the planted object masks, mapped through the view transform."""

    def __init__(self, scenario: SyntheticScenario):
        self._scenario = scenario
        self.segmenter_id = "synthetic-seg-v1"

    def segment(self, view: FrameView) -> list[np.ndarray]:
        t = view.frame_index
        p = self._scenario.params
        masks: list[np.ndarray] = []
        union = None
        for obj in self._scenario.objects:
            if not obj.visible(t):
                continue
            box = view.to_view_coords(obj.mask_box(t, view.zoom))
            grid = _raster(box, obj.shape, view.height, view.width)
            if not grid.any():
                continue
            masks.append(grid)
            union = grid if union is None else (union | grid)
        if p.background_mask:
            bg = ~union if union is not None else np.ones((view.height, view.width), dtype=bool)
            if bg.any():
                masks.append(bg)
        return masks


class SyntheticExtractor:
    """Writes each object's embedding into the cells its box covers."""

    def __init__(self, scenario: SyntheticScenario):
        self._scenario = scenario
        self.extractor_id = f"synthetic-feat-v1-s{scenario.params.feature_scale}"
        self.dim = scenario.params.dim

    def extract(self, view: FrameView) -> np.ndarray:
        p = self._scenario.params
        scale = p.feature_scale
        gh, gw = view.height // scale, view.width // scale
        fm = np.empty((gh, gw, p.dim), dtype=np.float64)
        fm[:] = self._scenario.background_vec
        t = view.frame_index
        for obj in self._scenario.objects:
            if not obj.visible(t):
                continue
            box = view.to_view_coords(obj.boxes[t])
            grid = _raster(box, obj.shape, gh, gw, scale=scale)
            if grid.any():
                fm[grid] = obj.embedding_for(t, view.zoom)
        return fm


def ground_truth_track(scenario: SyntheticScenario, query_time: int) -> list[tuple[int, BBox]]:
    """Latest target appearance at or before query_time, clipped to it."""
    target = scenario.target
    best: list[tuple[int, BBox]] = []
    for s, e in target.spans:
        if s > query_time:
            break
        e = min(e, query_time)
        best = [(t, target.boxes[t]) for t in range(s, e + 1)]
    return best


def annotations_for(scenario: SyntheticScenario) -> list[dict]:
    """Benchmark-format annotation records (one query per scenario target)."""
    target = scenario.target
    if not target.spans:
        return []
    query_time = scenario.params.frame_count - 1
    qf = target.spans[0][0]
    gt = ground_truth_track(scenario, query_time)
    return [
        {
            "query_id": f"{scenario.video_id}:q0",
            "video_id": scenario.video_id,
            "query_frame": qf,
            "query_box": target.boxes[qf].to_json(),
            "query_time": query_time,
            "gt_track": [{"frame": t, **b.to_json()} for t, b in gt],
        }
    ]


def scenario_to_json(scenario: SyntheticScenario) -> str:
    return json.dumps(
        {"seed": scenario.seed, "params": scenario.params.to_json()}, indent=2, sort_keys=True
    ) + "\n"


def scenario_from_json(text: str) -> SyntheticScenario:
    try:
        obj = json.loads(text)
        seed = int(obj["seed"])
        params = ScenarioParams.from_json(obj["params"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"malformed scenario file: {exc}") from exc
    return generate_scenario(seed, params)
