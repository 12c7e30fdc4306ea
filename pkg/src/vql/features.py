"""Feature-map kernels: half-pixel bilinear resize and mask pooling.

A feature map is a (h, w, d) array. Resizing samples the source at
(i + 0.5) * h / H - 0.5 per axis, clamped to the valid range, so it agrees
with the common align_corners=False convention. Pooling is the per-channel
mean over a mask's foreground cells. All arithmetic runs in float64; callers
decide the storage dtype.
"""
from __future__ import annotations

import numpy as np

from vql.core import BinaryMask, decode_mask


def _gather(src, out_h, out_w, rows, cols):
    """Resized values for target pixels rows[0]:rows[1] x cols[0]:cols[1].

    The sampling grid is always laid out for the full (out_h, out_w) target,
    so a windowed gather returns exactly the corresponding slice of the full
    resize. That is what lets pooling stay lazy per mask bounding box.
    """
    h, w = src.shape[0], src.shape[1]
    ys = (np.arange(rows[0], rows[1], dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(cols[0], cols[1], dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    np.clip(ys, 0.0, h - 1.0, out=ys)
    np.clip(xs, 0.0, w - 1.0, out=xs)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = (1.0 - fx) * src[np.ix_(y0, x0)] + fx * src[np.ix_(y0, x1)]
    bot = (1.0 - fx) * src[np.ix_(y1, x0)] + fx * src[np.ix_(y1, x1)]
    return (1.0 - fy) * top + fy * bot


def resize_feature_map(fm: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear-resize a (h, w, d) map to (out_h, out_w, d)."""
    src = np.asarray(fm, dtype=np.float64)
    if src.ndim != 3:
        raise ValueError(f"feature map must be (h, w, d), got shape {src.shape}")
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target dims must be positive, got {out_h}x{out_w}")
    if src.shape[0] == out_h and src.shape[1] == out_w:
        return src.copy()
    return _gather(src, out_h, out_w, (0, out_h), (0, out_w))


def pool_region(fm: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Per-channel mean of fm over the foreground of a same-sized bool grid."""
    src = np.asarray(fm, dtype=np.float64)
    g = np.asarray(grid, dtype=bool)
    if src.ndim != 3:
        raise ValueError(f"feature map must be (h, w, d), got shape {src.shape}")
    if g.shape != src.shape[:2]:
        raise ValueError(f"mask grid {g.shape} does not match feature map {src.shape[:2]}")
    count = int(g.sum())
    if count == 0:
        raise ValueError("cannot pool over an empty mask")
    return src[g].mean(axis=0)


def pooled_embedding(fm: np.ndarray, mask: BinaryMask | np.ndarray) -> np.ndarray:
    """Pool fm over a mask, resizing the map to the mask's resolution lazily.

    Accepts run-length masks or decoded bool grids. Only the mask's
    bounding-box window of the resized map is materialized; the full
    (mask_height, mask_width, d) array never exists.
    """
    src = np.asarray(fm, dtype=np.float64)
    if src.ndim != 3:
        raise ValueError(f"feature map must be (h, w, d), got shape {src.shape}")
    grid = decode_mask(mask) if isinstance(mask, BinaryMask) else np.asarray(mask, dtype=bool)
    if not grid.any():
        raise ValueError("cannot pool over an empty mask")
    mh, mw = grid.shape
    rows = np.flatnonzero(grid.any(axis=1))
    cols = np.flatnonzero(grid.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    if src.shape[0] == mh and src.shape[1] == mw:
        window = src[r0:r1, c0:c1]
    else:
        window = _gather(src, mh, mw, (r0, r1), (c0, c1))
    sub = grid[r0:r1, c0:c1]
    return window[sub].mean(axis=0)
