"""Pixel-level helpers: grayscale, blur statistic, crops, PNG io, overlays."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from vql.core import BBox

# ITU-R 601 luma weights.
_GRAY = np.array([0.299, 0.587, 0.114])


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """(h, w, 3) image to float64 luma; float 2-d input passes through."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ _GRAY
    raise ValueError(f"expected (h, w) or (h, w, 3) image, got shape {arr.shape}")


def laplacian_variance(img: np.ndarray) -> float:
    """Population variance of the 4-neighbour Laplacian over the valid region.

    The kernel is [[0,1,0],[1,-4,1],[0,1,0]]; border pixels without a full
    neighbourhood are excluded rather than padded.
    """
    g = to_grayscale(img)
    if g.shape[0] < 3 or g.shape[1] < 3:
        raise ValueError(f"image must be at least 3x3 for the blur statistic, got {g.shape}")
    resp = (
        g[:-2, 1:-1] + g[2:, 1:-1] + g[1:-1, :-2] + g[1:-1, 2:] - 4.0 * g[1:-1, 1:-1]
    )
    return float(np.mean((resp - resp.mean()) ** 2))


def crop_view(img: np.ndarray, rect: BBox, out_h: int, out_w: int) -> np.ndarray:
    """Sample a continuous crop rectangle into an (out_h, out_w) uint8 image.

    Output pixel centers map linearly onto the rectangle; sampling is
    bilinear with the same half-pixel convention as the feature kernels, so a
    full-frame rect at native resolution is the identity.
    """
    src = np.asarray(img, dtype=np.float64)
    if src.ndim == 2:
        src = src[:, :, None]
    h, w = src.shape[0], src.shape[1]
    xs = rect.x + (np.arange(out_w) + 0.5) * (rect.w / out_w) - 0.5
    ys = rect.y + (np.arange(out_h) + 0.5) * (rect.h / out_h) - 0.5
    np.clip(xs, 0.0, w - 1.0, out=xs)
    np.clip(ys, 0.0, h - 1.0, out=ys)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    top = (1.0 - fx) * src[np.ix_(y0, x0)] + fx * src[np.ix_(y0, x1)]
    bot = (1.0 - fx) * src[np.ix_(y1, x0)] + fx * src[np.ix_(y1, x1)]
    out = (1.0 - fy) * top + fy * bot
    out = np.rint(np.clip(out, 0.0, 255.0)).astype(np.uint8)
    return out[:, :, 0] if np.asarray(img).ndim == 2 else out


def box_blur(img: np.ndarray, passes: int = 3) -> np.ndarray:
    """Repeated 3x3 mean filter with edge clamping; used to plant blur."""
    arr = np.asarray(img, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    for _ in range(passes):
        padded = np.pad(arr, ((1, 1), (1, 1), (0, 0)), mode="edge")
        acc = np.zeros_like(arr)
        for dr in (0, 1, 2):
            for dc in (0, 1, 2):
                acc += padded[dr : dr + arr.shape[0], dc : dc + arr.shape[1]]
        arr = acc / 9.0
    out = np.rint(np.clip(arr, 0.0, 255.0)).astype(np.uint8)
    return out[:, :, 0] if squeeze else out


def draw_box(img: np.ndarray, box: BBox, color: tuple[int, int, int], thickness: int = 3) -> np.ndarray:
    """Return a copy of img with a box border burned in."""
    out = np.array(img, copy=True)
    h, w = out.shape[0], out.shape[1]
    x0 = max(int(round(box.x)), 0)
    y0 = max(int(round(box.y)), 0)
    x1 = min(int(round(box.right)), w)
    y1 = min(int(round(box.bottom)), h)
    if x1 <= x0 or y1 <= y0:
        return out
    t = min(thickness, x1 - x0, y1 - y0)
    c = np.array(color, dtype=out.dtype)
    out[y0 : y0 + t, x0:x1] = c
    out[y1 - t : y1, x0:x1] = c
    out[y0:y1, x0 : x0 + t] = c
    out[y0:y1, x1 - t : x1] = c
    return out


def write_png(path: str | Path, img: np.ndarray) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(str(path), format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return np.asarray(im.convert("RGB"))
