"""Classical segmentation: background-mode thresholding + connected components.

Good enough to produce exact pixel masks on rendered or high-contrast
footage, and fully deterministic. Heavier learned segmenters plug in through
the same masks() surface (see models.py).
"""

from __future__ import annotations

import numpy as np

# color-space distance (max over channels) that separates object from background
_DEFAULT_TAU = 24.0


def estimate_background(img: np.ndarray) -> np.ndarray:
    """Most common coarsely-quantized color, as float RGB."""
    arr = np.asarray(img)
    q = (arr // 8).reshape(-1, 3).astype(np.int64)
    packed = q[:, 0] * 1048576 + q[:, 1] * 1024 + q[:, 2]
    values, counts = np.unique(packed, return_counts=True)
    top = values[np.argmax(counts)]
    mode = np.array([top // 1048576, (top // 1024) % 1024, top % 1024], dtype=np.float64)
    # center of the winning quantization bucket
    return mode * 8.0 + 4.0


def label_components(fg: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a bool grid, as one bool mask each.

    Components come back ordered by their first foreground pixel in row-major
    scan order, which keeps region ids stable across runs.
    """
    h, w = fg.shape
    labels = np.zeros((h, w), dtype=np.int64)
    parent: list[int] = [0]  # union-find; index 0 = background

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    nxt = 1
    for r in range(h):
        for c in range(w):
            if not fg[r, c]:
                continue
            up = labels[r - 1, c] if r else 0
            left = labels[r, c - 1] if c else 0
            if up and left:
                ru, rl = find(up), find(left)
                labels[r, c] = ru
                if ru != rl:
                    parent[max(ru, rl)] = min(ru, rl)
            elif up or left:
                labels[r, c] = up or left
            else:
                parent.append(nxt)
                labels[r, c] = nxt
                nxt += 1
    if nxt == 1:
        return []
    roots = np.array([find(v) for v in range(nxt)], dtype=np.int64)
    flat = roots[labels.reshape(-1)].reshape(h, w)
    seen: dict[int, int] = {}
    masks: list[np.ndarray] = []
    for root in flat.reshape(-1):
        if root and root not in seen:
            seen[root] = len(masks)
            masks.append(flat == root)
    return masks


class ContourSegmenter:
    """Threshold against the estimated background, split into components."""

    segmenter_id = "contour-v1"

    def __init__(self, tau: float = _DEFAULT_TAU, min_area: int = 12):
        self.tau = float(tau)
        self.min_area = int(min_area)

    def foreground(self, img: np.ndarray) -> np.ndarray:
        arr = np.asarray(img, dtype=np.float64)
        bg = estimate_background(img)
        return np.abs(arr - bg).max(axis=2) > self.tau

    def masks(self, img: np.ndarray) -> list[np.ndarray]:
        parts = label_components(self.foreground(img))
        return [m for m in parts if int(m.sum()) >= self.min_area]
