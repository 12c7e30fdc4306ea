"""Benchmark metrics and the evaluation entry point.

Works on plain JSON records so external result files evaluate the same way
as engine output: annotations are {query_id, video_id, query_frame,
query_box, query_time, gt_track}, results are {query_id, score, track},
where every track entry is {frame, x, y, w, h}.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from vql.core import BBox, SchemaError, box_iou

_BOX_KEYS = ("x", "y", "w", "h")


def _box(rec: dict, where: str) -> BBox:
    try:
        return BBox(*(float(rec[k]) for k in _BOX_KEYS))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: bad box {rec!r}: {exc}") from exc


def _track(records, where: str) -> list[tuple[int, BBox]]:
    out: list[tuple[int, BBox]] = []
    seen: set[int] = set()
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or "frame" not in rec:
            raise SchemaError(f"{where}[{i}]: track entry needs a frame number")
        frame = int(rec["frame"])
        if frame in seen:
            raise SchemaError(f"{where}[{i}]: duplicate frame {frame}")
        seen.add(frame)
        out.append((frame, _box(rec, f"{where}[{i}]")))
    if not out:
        raise SchemaError(f"{where}: empty track")
    return out


def load_annotations(path) -> list[dict]:
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise SchemaError("annotations file must hold a JSON list")
    seen: set[str] = set()
    for i, rec in enumerate(records):
        where = f"annotations[{i}]"
        for key in ("query_id", "video_id", "query_frame", "query_box", "query_time", "gt_track"):
            if key not in rec:
                raise SchemaError(f"{where}: missing {key}")
        if rec["query_id"] in seen:
            raise SchemaError(f"{where}: duplicate query_id {rec['query_id']!r}")
        seen.add(rec["query_id"])
        _box(rec["query_box"], f"{where}.query_box")
        _track(rec["gt_track"], f"{where}.gt_track")
    return records


def load_results(path) -> list[dict]:
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise SchemaError("results file must hold a JSON list")
    seen: set[str] = set()
    for i, rec in enumerate(records):
        where = f"results[{i}]"
        for key in ("query_id", "score", "track"):
            if key not in rec:
                raise SchemaError(f"{where}: missing {key}")
        if rec["query_id"] in seen:
            raise SchemaError(f"{where}: duplicate query_id {rec['query_id']!r}")
        seen.add(rec["query_id"])
        if not np.isfinite(float(rec["score"])):
            raise SchemaError(f"{where}: score must be finite")
        _track(rec["track"], f"{where}.track")
    return records


def temporal_iou(a_start: int, a_end: int, b_start: int, b_end: int) -> float:
    """IoU of two inclusive frame intervals."""
    inter = min(a_end, b_end) - max(a_start, b_start) + 1
    inter = max(inter, 0)
    union = (a_end - a_start + 1) + (b_end - b_start + 1) - inter
    return inter / union if union > 0 else 0.0


def st_iou(pred: list[tuple[int, BBox]], gt: list[tuple[int, BBox]]) -> float:
    """Spatio-temporal tube IoU.

    Box intersection summed over all frames, divided by box union summed
    over all frames; a frame covered by only one track contributes its full
    box area to the union.
    """
    p = dict(pred)
    g = dict(gt)
    inter_sum = 0.0
    union_sum = 0.0
    for frame in p.keys() | g.keys():
        a, b = p.get(frame), g.get(frame)
        if a is not None and b is not None:
            iw = min(a.right, b.right) - max(a.x, b.x)
            ih = min(a.bottom, b.bottom) - max(a.y, b.y)
            inter = iw * ih if (iw > 0 and ih > 0) else 0.0
            inter_sum += inter
            union_sum += a.area + b.area - inter
        else:
            union_sum += (a or b).area
    return inter_sum / union_sum if union_sum > 0 else 0.0


def average_precision(pairs: list[tuple[float, float]], num_gt: int, threshold: float) -> float:
    """All-point interpolated AP over (score, overlap) prediction pairs."""
    if num_gt == 0 or not pairs:
        return 0.0
    scores = np.array([s for s, _ in pairs])
    overlaps = np.array([o for _, o in pairs])
    order = np.argsort(-scores, kind="stable")
    tp = overlaps[order] >= threshold
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, len(pairs) + 1)
    recall = cum_tp / num_gt
    # at every true positive, {j: recall_j >= recall_i} is exactly {j >= i},
    # so the right-to-left running max gives the interpolation envelope
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = 0.0
    ap = 0.0
    for i in np.flatnonzero(tp):
        ap += (recall[i] - prev_recall) * envelope[i]
        prev_recall = recall[i]
    return float(ap)


def recovery_percent(pred: list[tuple[int, BBox]], gt: list[tuple[int, BBox]]) -> float:
    """Share of predicted frames whose box overlaps ground truth at IoU >= 0.5."""
    if not pred:
        return 0.0
    g = dict(gt)
    good = sum(1 for f, b in pred if f in g and box_iou(b, g[f]) >= 0.5)
    return 100.0 * good / len(pred)


def evaluate(
    results: list[dict],
    annotations: list[dict],
    threshold: float = 0.25,
    temporal_success: bool = False,
) -> dict:
    """Score a results file against its annotations.

    Pairs by query_id; an annotated query with no result counts as a miss
    everywhere. Reports AP over tube IoU and over pure temporal IoU of the
    track extents. Success is tube IoU > 0.05, or temporal IoU with
    ``temporal_success`` (the benchmark leaves the choice open).
    """
    by_qid = {r["query_id"]: r for r in results}
    unknown = set(by_qid) - {a["query_id"] for a in annotations}
    if unknown:
        raise SchemaError(f"results reference unknown query ids: {sorted(unknown)}")
    st_pairs: list[tuple[float, float]] = []
    t_pairs: list[tuple[float, float]] = []
    overlaps: list[float] = []
    recoveries: list[float] = []
    successes = 0
    for ann in annotations:
        res = by_qid.get(ann["query_id"])
        if res is None:
            overlaps.append(0.0)
            recoveries.append(0.0)
            continue
        pred = _track(res["track"], "track")
        gt = _track(ann["gt_track"], "gt_track")
        st = st_iou(pred, gt)
        p_frames = [f for f, _ in pred]
        g_frames = [f for f, _ in gt]
        t = temporal_iou(min(p_frames), max(p_frames), min(g_frames), max(g_frames))
        score = float(res["score"])
        st_pairs.append((score, st))
        t_pairs.append((score, t))
        overlaps.append(st)
        if (t if temporal_success else st) > 0.05:
            successes += 1
        recoveries.append(recovery_percent(pred, gt))
    n = len(annotations)
    return {
        "num_queries": n,
        "st_ap": average_precision(st_pairs, n, threshold),
        "t_ap": average_precision(t_pairs, n, threshold),
        "success_rate": successes / n if n else 0.0,
        "recovery_pct": float(np.mean(recoveries)) if n else 0.0,
        "mean_st_iou": float(np.mean(overlaps)) if n else 0.0,
    }


def format_report(report: dict, threshold: float = 0.25) -> str:
    lines = [
        f"queries:     {report['num_queries']}",
        f"stAP@{threshold:g}:   {report['st_ap']:.3f}",
        f"tAP@{threshold:g}:    {report['t_ap']:.3f}",
        f"success:     {report['success_rate']:.3f}",
        f"recovery:    {report['recovery_pct']:.3f}",
        f"mean stIoU:  {report['mean_st_iou']:.3f}",
    ]
    return "\n".join(lines)
