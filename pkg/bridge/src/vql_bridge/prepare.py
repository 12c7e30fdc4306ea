"""Turn a directory of numbered PNG frames into a token-store directory.

Segment each frame, extract a dense feature map, upsample it to pixel
resolution, and mean-pool one embedding per region mask. Extraction runs in
batches; a batch that exhausts memory is retried frame by frame, so large
backbones degrade to slower runs instead of failing the export.
"""

from __future__ import annotations

import io
import os
from pathlib import Path

import numpy as np

from vql_bridge.features import pool_mask, resize_bilinear
from vql_bridge.models import get_extractor, get_segmenter
from vql_bridge.store_io import (
    RegionRecord,
    _atomic_write,
    list_frames,
    read_image,
    rle_encode,
    tight_box,
    write_store,
)


def _extract(extractor, imgs: list[np.ndarray]) -> list[np.ndarray]:
    try:
        return extractor.features_batch(imgs)
    except MemoryError:
        if len(imgs) == 1:
            raise
        return [extractor.features_batch([im])[0] for im in imgs]


def bridge_prepare(
    frames_dir: str | Path,
    out_dir: str | Path,
    *,
    segmenter="contour-v1",
    extractor="dense-desc-v1",
    video_id: str | None = None,
    fps: float = 5.0,
    batch_size: int = 8,
    export_features: str | Path | None = None,
    force: bool = False,
) -> dict:
    """Write a token store for frames_dir into out_dir; returns a summary.

    segmenter / extractor take registry ids or already-built model objects.
    export_features names a directory that receives each frame's raw
    (grid_h, grid_w, d) feature map as ``00000.npy`` — the ground truth for
    auditing pooled embeddings. An existing store is only replaced with
    force=True.
    """
    seg = get_segmenter(segmenter) if isinstance(segmenter, str) else segmenter
    ext = get_extractor(extractor) if isinstance(extractor, str) else extractor
    out = Path(out_dir)
    if (out / "manifest.json").exists() and not force:
        raise ValueError(f"{out} already holds a store; pass force=True to replace it")
    paths = list_frames(frames_dir)
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")

    export = Path(export_features) if export_features is not None else None
    if export is not None:
        export.mkdir(parents=True, exist_ok=True)

    records: list[RegionRecord] = []
    rows: list[np.ndarray] = []
    height = width = None
    for start in range(0, len(paths), batch_size):
        chunk = paths[start : start + batch_size]
        imgs = [read_image(p) for p in chunk]
        for offset, img in enumerate(imgs):
            if height is None:
                height, width = int(img.shape[0]), int(img.shape[1])
            elif img.shape[:2] != (height, width):
                raise ValueError(
                    f"frame {start + offset} is {img.shape[1]}x{img.shape[0]}, "
                    f"expected {width}x{height}"
                )
        fms = _extract(ext, imgs)
        for offset, (img, fm) in enumerate(zip(imgs, fms)):
            fi = start + offset
            if export is not None:
                _atomic_write(
                    export / f"{fi:05d}.npy", _npy_bytes(np.asarray(fm, dtype=np.float64))
                )
            upsampled = resize_bilinear(fm, height, width)
            for rid, mask in enumerate(seg.masks(img)):
                rows.append(pool_mask(upsampled, mask))
                records.append(
                    RegionRecord(
                        frame_index=fi,
                        region_id=rid,
                        bbox=tight_box(mask),
                        runs=rle_encode(mask),
                        area_fraction=float(np.count_nonzero(mask)) / float(width * height),
                    )
                )

    embeddings = (
        np.vstack(rows) if rows else np.zeros((0, ext.dim), dtype=np.float64)
    )
    write_store(
        out,
        video_id=video_id or Path(frames_dir).resolve().parent.name or "video",
        fps=float(fps),
        width=width,
        height=height,
        dim=int(ext.dim),
        segmenter_id=seg.segmenter_id,
        extractor_id=ext.extractor_id,
        frame_count=len(paths),
        records=records,
        embeddings=embeddings,
        backend=f"bridge:{seg.segmenter_id}+{ext.extractor_id}",
        frames_dir=os.path.relpath(Path(frames_dir).resolve(), out.resolve()),
    )
    return {"frames": len(paths), "tokens": len(records), "dim": int(ext.dim)}


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, arr)
    return buf.getvalue()
