"""Similarity search over a video token set.

Pipeline: score every region token against the query pool, keep the best
region per frame, suppress near-duplicate peaks across frames, then take the
top-k survivors above the similarity threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vql.core import EngineConfig, ScoredCandidate
from vql.tokens import VideoTokenSet

# tokens scored per matmul block; keeps peak memory flat for long videos
_BLOCK = 65536


def max_cosine(tokens: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Best cosine similarity of each token row against any query row.

    Arithmetic runs in float64 regardless of input dtype. Zero-norm rows on
    either side are rejected: a zero embedding has no direction and scoring
    it silently would poison every downstream threshold.
    """
    t = np.asarray(tokens, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if t.ndim != 2 or q.ndim != 2 or t.shape[1] != q.shape[1]:
        raise ValueError("tokens and queries must be 2-d with matching dims")
    tn = np.linalg.norm(t, axis=1)
    qn = np.linalg.norm(q, axis=1)
    if not np.all(tn > 0.0):
        raise ValueError(f"zero-norm token embedding at row {int(np.argmin(tn))}")
    if not np.all(qn > 0.0):
        raise ValueError(f"zero-norm query embedding at row {int(np.argmin(qn))}")
    sims = (t / tn[:, None]) @ (q / qn[:, None]).T
    return np.clip(sims.max(axis=1), -1.0, 1.0)


@dataclass(frozen=True)
class ScoreTable:
    """Per-token max-cosine scores for frames in [lo, hi].

    ``scores`` aligns with ``token_set.tokens``; rows outside the frame
    range hold NaN and must not be read.
    """

    token_set: VideoTokenSet
    scores: np.ndarray
    lo: int
    hi: int


def score_tokens(
    token_set: VideoTokenSet,
    queries,
    lo: int = 0,
    hi: int | None = None,
) -> ScoreTable:
    """Score all tokens in frames [lo, hi] against the query pool."""
    if hi is None:
        hi = token_set.frame_count - 1
    hi = min(hi, token_set.frame_count - 1)
    lo = max(lo, 0)
    scores = np.full(len(token_set.tokens), np.nan)
    if lo > hi or token_set.frame_count == 0 or not len(token_set.tokens):
        return ScoreTable(token_set, scores, lo, hi)
    q = np.stack([np.asarray(qt.embedding, dtype=np.float64) for qt in queries])
    start = int(token_set.frame_ranges[lo, 0])
    end = int(token_set.frame_ranges[hi, 1])
    for block in range(start, end, _BLOCK):
        stop = min(block + _BLOCK, end)
        try:
            scores[block:stop] = max_cosine(token_set.embeddings[block:stop], q)
        except ValueError as exc:
            raise ValueError(f"tokens[{block}:{stop}]: {exc}") from exc
    return ScoreTable(token_set, scores, lo, hi)


def intra_frame_nms(table: ScoreTable) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the best-scoring region per frame.

    Returns dense per-frame arrays over the whole video: ``scores`` (0.0 for
    frames with no scored token) and ``token_idx`` (-1 likewise). Ties go to
    the lowest region id, i.e. the first row of the frame slice.
    """
    ts = table.token_set
    scores = np.zeros(ts.frame_count)
    token_idx = np.full(ts.frame_count, -1, dtype=np.int64)
    for fi in range(table.lo, table.hi + 1):
        start, end = (int(v) for v in ts.frame_ranges[fi])
        if start == end:
            continue
        rows = table.scores[start:end]
        best = int(np.argmax(rows))  # argmax keeps the first (lowest region id) on ties
        scores[fi] = rows[best]
        token_idx[fi] = start + best
    return scores, token_idx


def inter_frame_nms(scores, t_nms: float) -> list[tuple[int, float]]:
    """Suppress neighbouring frames around each score peak.

    Repeatedly select the highest remaining positive score (ties: later
    frame), then nullify contiguous frames on both sides while they stay at
    or above ``t_nms * peak``; the walk stops at the first frame below the
    bound. Returns (frame, score) peaks in selection order.
    """
    s = np.asarray(scores, dtype=np.float64).copy()
    n = s.shape[0]
    peaks: list[tuple[int, float]] = []
    while True:
        # argmax over the reversed array lands on the later frame for ties
        best_frame = n - 1 - int(np.argmax(s[::-1])) if n else -1
        if best_frame < 0 or s[best_frame] <= 0.0:
            return peaks
        best = float(s[best_frame])
        peaks.append((best_frame, best))
        bound = t_nms * best
        left = best_frame
        while left - 1 >= 0 and s[left - 1] >= bound:
            left -= 1
        right = best_frame
        while right + 1 < n and s[right + 1] >= bound:
            right += 1
        s[left : right + 1] = -np.inf


def select_candidates(
    peaks: list[tuple[int, float]],
    token_idx: np.ndarray,
    token_set: VideoTokenSet,
    config: EngineConfig,
) -> list[ScoredCandidate]:
    """Top-k peaks at or above t_sim, ranked by score then later frame."""
    kept = [(fi, sc) for fi, sc in peaks if sc >= config.t_sim]
    kept.sort(key=lambda p: (-p[1], -p[0]))
    return [_candidate(fi, sc, token_idx, token_set) for fi, sc in kept[: config.k]]


def _candidate(
    frame_index: int, score: float, token_idx: np.ndarray, token_set: VideoTokenSet
) -> ScoredCandidate:
    ti = int(token_idx[frame_index])
    tok = token_set.tokens[ti]
    return ScoredCandidate(
        frame_index=frame_index,
        region_id=tok.region_id,
        bbox=tok.bbox,
        embedding=token_set.embeddings[ti],
        score=float(score),
        token_index=ti,
    )


def search(
    token_set: VideoTokenSet,
    queries,
    config: EngineConfig,
    lo: int = 0,
    hi: int | None = None,
    fallback: bool = True,
) -> list[ScoredCandidate]:
    """Run the full search stage over frames [lo, hi].

    When no peak clears t_sim the benchmark still expects an answer, so with
    ``fallback`` the single best available peak is returned even below the
    threshold (the best non-positive frame maximum if there are no positive
    peaks at all). Only a token-free range yields an empty result.
    """
    table = score_tokens(token_set, queries, lo=lo, hi=hi)
    frame_scores, token_idx = intra_frame_nms(table)
    peaks = inter_frame_nms(frame_scores, config.t_nms)
    cands = select_candidates(peaks, token_idx, token_set, config)
    if cands or not fallback:
        return cands
    if peaks:
        fi, sc = peaks[0]
        return [_candidate(fi, sc, token_idx, token_set)]
    scored = [fi for fi in range(token_set.frame_count) if token_idx[fi] >= 0]
    if not scored:
        return []
    best = max(scored, key=lambda fi: (frame_scores[fi], fi))
    return [_candidate(best, float(frame_scores[best]), token_idx, token_set)]
