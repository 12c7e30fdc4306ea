"""Rendered test clips: flat background, solid rectangles, exact boxes.

Everything is integer-positioned so the expected masks, tight boxes, and
area fractions are known exactly — the clips double as oracles.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

BACKGROUND = (16, 16, 16)
TARGET_COLOR = (200, 60, 40)
DISTRACTOR_COLOR = (40, 160, 220)

WIDTH, HEIGHT = 96, 72
RECT_W, RECT_H = 18, 12


def moving_rect_clip(num_frames: int = 10, step: tuple[int, int] = (4, 2), distractor: bool = True):
    """(frames, gt_boxes): a rectangle marching diagonally, optional static distractor."""
    frames, gt = [], []
    for i in range(num_frames):
        img = np.zeros((HEIGHT, WIDTH, 3), np.uint8)
        img[:] = BACKGROUND
        x, y = 12 + step[0] * i, 20 + step[1] * i
        img[y : y + RECT_H, x : x + RECT_W] = TARGET_COLOR
        if distractor:
            img[6:16, 70:84] = DISTRACTOR_COLOR
        frames.append(img)
        gt.append((float(x), float(y), float(RECT_W), float(RECT_H)))
    return frames, gt


def static_clip(num_frames: int = 8):
    """(frames, box): a single rectangle that never moves."""
    frames = []
    for _ in range(num_frames):
        img = np.zeros((HEIGHT, WIDTH, 3), np.uint8)
        img[:] = BACKGROUND
        img[30:42, 40:58] = TARGET_COLOR
        frames.append(img)
    return frames, (40.0, 30.0, 18.0, 12.0)


def teleport_clip(num_frames: int = 8, jump_at: int = 4):
    """Rectangle that jumps farther than any plausible search radius."""
    frames, gt = [], []
    for i in range(num_frames):
        img = np.zeros((HEIGHT, WIDTH, 3), np.uint8)
        img[:] = BACKGROUND
        x = 8 if i < jump_at else 70
        img[30:42, x : x + RECT_W] = TARGET_COLOR
        frames.append(img)
        gt.append((float(x), 30.0, float(RECT_W), float(RECT_H)))
    return frames, gt


def write_frames(frames, frames_dir) -> None:
    frames_dir.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        Image.fromarray(f).save(frames_dir / f"{i:05d}.png")
