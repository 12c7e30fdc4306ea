"""Dense descriptors plus the resize/pool kernels that turn them into tokens.

The bilinear resize uses half-pixel centers with edge clamping and the
pooling is a plain mean over mask pixels — the same semantics the
localization engine uses, written independently so that the cross-check
between the two implementations means something.
"""

from __future__ import annotations

import numpy as np

# keeps every pooled descriptor away from zero norm, even on black regions
_BIAS = 0.1


class DenseDescriptor:
    """Hand-designed per-cell descriptor over stride x stride patches.

    Channels: bias, mean R/G/B, mean gray, gray std, |dx|, |dy|, gray range,
    center-minus-border contrast. Everything is scaled to roughly [0, 1].
    """

    extractor_id = "dense-desc-v1"
    dim = 10

    def __init__(self, stride: int = 4):
        if stride < 1:
            raise ValueError(f"stride must be >= 1, got {stride}")
        self.stride = int(stride)

    def features(self, img: np.ndarray) -> np.ndarray:
        arr = np.asarray(img, dtype=np.float64) / 255.0
        h, w = arr.shape[0], arr.shape[1]
        s = self.stride
        gh, gw = max(h // s, 1), max(w // s, 1)
        # trim the ragged edge so cells tile exactly
        cells = arr[: gh * s, : gw * s].reshape(gh, s, gw, s, 3).transpose(0, 2, 1, 3, 4)
        gray = cells @ np.array([0.299, 0.587, 0.114])
        mean_rgb = cells.mean(axis=(2, 3))
        mean_gray = gray.mean(axis=(2, 3))
        std_gray = gray.std(axis=(2, 3))
        dx = np.abs(np.diff(gray, axis=3)).mean(axis=(2, 3)) if s > 1 else np.zeros((gh, gw))
        dy = np.abs(np.diff(gray, axis=2)).mean(axis=(2, 3)) if s > 1 else np.zeros((gh, gw))
        rng = gray.max(axis=(2, 3)) - gray.min(axis=(2, 3))
        center = gray[:, :, s // 2, s // 2]
        contrast = center - mean_gray
        fm = np.stack(
            [
                np.full((gh, gw), _BIAS),
                mean_rgb[:, :, 0],
                mean_rgb[:, :, 1],
                mean_rgb[:, :, 2],
                mean_gray,
                std_gray,
                dx,
                dy,
                rng,
                contrast,
            ],
            axis=2,
        )
        return fm

    def features_batch(self, imgs: list[np.ndarray]) -> list[np.ndarray]:
        return [self.features(im) for im in imgs]


def resize_bilinear(fm: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resize, separable, edges clamped."""
    src = np.asarray(fm, dtype=np.float64)
    h, w = src.shape[0], src.shape[1]

    def axis(n_src: int, n_out: int):
        pos = (np.arange(n_out) + 0.5) * (n_src / n_out) - 0.5
        pos = np.clip(pos, 0.0, n_src - 1.0)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    ylo, yhi, fy = axis(h, out_h)
    xlo, xhi, fx = axis(w, out_w)
    rows = src[ylo] * (1.0 - fy)[:, None, None] + src[yhi] * fy[:, None, None]
    return rows[:, xlo] * (1.0 - fx)[None, :, None] + rows[:, xhi] * fx[None, :, None]


def pool_mask(fm: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Mean feature over the mask's foreground cells."""
    picked = np.asarray(fm, dtype=np.float64)[np.asarray(mask, dtype=bool)]
    if picked.shape[0] == 0:
        raise ValueError("cannot pool an empty mask")
    return picked.mean(axis=0)
