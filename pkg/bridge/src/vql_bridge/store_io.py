"""On-disk interchange: numbered-frame reading and token-store writing.

Mirrors the directory layout the localization engine loads: manifest.json,
regions.jsonl sorted by (frame_index, region_id) with embedding_offset equal
to the record index, embeddings.bin as little-endian float32 rows. The
format is re-implemented here from its published layout on purpose — the
engine's validators are the compatibility test, not shared code.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

SCHEMA_VERSION = 1

_FRAME_RE = re.compile(r"^(\d{5})\.png$")


def list_frames(frames_dir: str | Path) -> list[Path]:
    """Frame paths in index order; indices must be contiguous from zero."""
    d = Path(frames_dir)
    if not d.is_dir():
        raise FileNotFoundError(f"frames directory not found: {d}")
    found = {int(m.group(1)): p for p in d.iterdir() if (m := _FRAME_RE.match(p.name))}
    if not found:
        raise ValueError(f"no frame PNGs in {d}")
    missing = [i for i in range(len(found)) if i not in found]
    if missing:
        raise ValueError(f"frame file missing: {d / f'{missing[0]:05d}.png'}")
    return [found[i] for i in range(len(found))]


def read_image(path: str | Path) -> np.ndarray:
    """PNG file as an (h, w, 3) uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


@dataclass(frozen=True)
class RegionRecord:
    """One region destined for regions.jsonl; bbox is (x, y, w, h) in pixels."""

    frame_index: int
    region_id: int
    bbox: tuple[float, float, float, float]
    runs: tuple[int, ...]
    area_fraction: float


def rle_encode(mask: np.ndarray) -> tuple[int, ...]:
    """Row-major run lengths, alternating background/foreground, background first."""
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if not flat.any():
        raise ValueError("mask has no foreground pixels")
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return tuple(int(r) for r in runs)


def tight_box(mask: np.ndarray) -> tuple[float, float, float, float]:
    """Smallest pixel-aligned box covering the mask's foreground."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return (
        float(cols[0]),
        float(rows[0]),
        float(cols[-1] - cols[0] + 1),
        float(rows[-1] - rows[0] + 1),
    )


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_store(
    out_dir: str | Path,
    *,
    video_id: str,
    fps: float,
    width: int,
    height: int,
    dim: int,
    segmenter_id: str,
    extractor_id: str,
    frame_count: int,
    records: list[RegionRecord],
    embeddings: np.ndarray,
    backend: str,
    frames_dir: str | None,
) -> None:
    if embeddings.shape != (len(records), dim):
        raise ValueError(
            f"embedding matrix {embeddings.shape} does not match "
            f"{len(records)} records of dim {dim}"
        )
    order = [(r.frame_index, r.region_id) for r in records]
    if order != sorted(order) or len(set(order)) != len(order):
        raise ValueError("records must be unique and sorted by (frame_index, region_id)")
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "video_id": video_id,
        "fps": fps,
        "frame_width": width,
        "frame_height": height,
        "embedding_dim": dim,
        "segmenter_id": segmenter_id,
        "extractor_id": extractor_id,
        "frame_count": frame_count,
        "token_count": len(records),
        "backend": backend,
        "frames_dir": frames_dir,
    }
    _atomic_write(d / "manifest.json", (json.dumps(manifest, indent=2) + "\n").encode())
    lines = []
    for offset, rec in enumerate(records):
        lines.append(
            json.dumps(
                {
                    "frame_index": rec.frame_index,
                    "region_id": rec.region_id,
                    "bbox": list(rec.bbox),
                    "rle": list(rec.runs),
                    "area_fraction": rec.area_fraction,
                    "embedding_offset": offset,
                },
                separators=(",", ":"),
            )
        )
    _atomic_write(d / "regions.jsonl", ("".join(line + "\n" for line in lines)).encode())
    _atomic_write(d / "embeddings.bin", np.ascontiguousarray(embeddings, dtype="<f4").tobytes())
