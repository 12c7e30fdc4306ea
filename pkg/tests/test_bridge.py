import json

import numpy as np
import pytest

from vql.backends.bridge import (
    BridgeTracker,
    PngFrameSource,
    bridge_bundle,
    load_tracks,
)
from vql.backends.synthetic import (
    ScenarioParams,
    SyntheticExtractor,
    SyntheticFrameSource,
    SyntheticSegmenter,
    annotations_for,
    generate_scenario,
    render_frame,
)
from vql.core import BBox, BackendError, EngineConfig, LocalizationRequest, SchemaError
from vql.images import write_png
from vql.pipeline import localize
from vql.store import save_token_set
from vql.tokens import build_token_set


def _export(tmp_path, seed=31, **kw):
    scn = generate_scenario(seed, ScenarioParams(**kw))
    src = SyntheticFrameSource(scn)
    ts = build_token_set(src, SyntheticSegmenter(scn), SyntheticExtractor(scn))
    frames = tmp_path / "frames"
    frames.mkdir()
    for t in range(scn.params.frame_count):
        write_png(frames / f"{t:05d}.png", render_frame(scn, t))
    store = tmp_path / "store"
    store.mkdir()
    save_token_set(store, ts, backend="bridge:test", frames_dir="../frames")
    return scn, ts, store


def test_bridge_round_trip_tokens_identical(tmp_path):
    scn, ts, store = _export(tmp_path, num_distractors=2)
    bundle, loaded = bridge_bundle(store, EngineConfig())
    assert loaded.video_id == ts.video_id
    assert loaded.frame_count == ts.frame_count
    assert np.array_equal(loaded.embeddings, ts.embeddings)
    assert len(loaded.tokens) == len(ts.tokens)
    for a, b in zip(loaded.tokens, ts.tokens):
        assert (a.frame, a.region_id, a.bbox, a.mask) == (b.frame, b.region_id, b.bbox, b.mask)
        assert a.area_fraction == b.area_fraction
    assert bundle.frames.frame_count == ts.frame_count
    assert not bundle.supports_views


def test_png_source_pixels_roundtrip(tmp_path):
    scn, ts, store = _export(tmp_path, num_distractors=1)
    bundle, _ = bridge_bundle(store, EngineConfig())
    t = scn.target.spans[0][0]
    assert np.array_equal(bundle.frames.pixels(t), render_frame(scn, t))


def test_png_source_names_missing_frame(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    img = np.zeros((8, 8, 3), dtype=np.uint8)
    for t in (0, 1, 3):
        write_png(d / f"{t:05d}.png", img)
    with pytest.raises(BackendError, match="00002.png"):
        PngFrameSource(d, "v", 5.0)


def test_png_source_rejects_bad_index(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    write_png(d / "00000.png", np.zeros((8, 8, 3), dtype=np.uint8))
    src = PngFrameSource(d, "v", 5.0)
    with pytest.raises(BackendError):
        src.pixels(1)


def test_bridge_tracker_merges_directions_and_clips():
    records = [
        {
            "seed_frame": 10,
            "direction": "forward",
            "boxes": [{"frame": f, "x": f, "y": 0, "w": 4, "h": 4} for f in range(10, 15)],
        },
        {
            "seed_frame": 10,
            "direction": "backward",
            "boxes": [{"frame": f, "x": f, "y": 0, "w": 4, "h": 4} for f in range(7, 11)],
        },
    ]
    tracker = BridgeTracker(records)
    got = tracker.track(10, BBox(10, 0, 4, 4), None, 0, 99)
    assert [f for f, _ in got] == list(range(7, 15))
    clipped = tracker.track(10, BBox(10, 0, 4, 4), None, 9, 12)
    assert [f for f, _ in clipped] == [9, 10, 11, 12]


def test_bridge_tracker_trims_noncontiguous_tail():
    records = [
        {
            "seed_frame": 5,
            "direction": "both",
            "boxes": [
                {"frame": 5, "x": 0, "y": 0, "w": 2, "h": 2},
                {"frame": 6, "x": 0, "y": 0, "w": 2, "h": 2},
                {"frame": 9, "x": 0, "y": 0, "w": 2, "h": 2},
            ],
        }
    ]
    got = BridgeTracker(records).track(5, BBox(0, 0, 2, 2), None, 0, 99)
    assert [f for f, _ in got] == [5, 6]


def test_bridge_tracker_unknown_seed_returns_seed_box():
    tracker = BridgeTracker([])
    box = BBox(3, 3, 5, 5)
    assert tracker.track(7, box, None, 0, 10) == [(7, box)]


def test_load_tracks_validation(tmp_path):
    p = tmp_path / "tracks.jsonl"
    p.write_text('{"seed_frame": 1, "direction": "sideways", "boxes": [{"frame": 1, "x": 0, "y": 0, "w": 1, "h": 1}]}\n')
    with pytest.raises(SchemaError, match="direction"):
        load_tracks(p)
    p.write_text('not json\n')
    with pytest.raises(SchemaError, match=":1:"):
        load_tracks(p)
    p.write_text('{"seed_frame": 1, "direction": "both", "boxes": []}\n')
    with pytest.raises(SchemaError, match="empty boxes"):
        load_tracks(p)


def test_bridge_bundle_uses_tracks_file_when_present(tmp_path):
    scn, ts, store = _export(tmp_path, num_distractors=0)
    bundle, _ = bridge_bundle(store, EngineConfig())
    assert bundle.tracker.tracker_id == "token-greedy-v1"
    (store / "tracks.jsonl").write_text(
        json.dumps(
            {
                "seed_frame": 0,
                "direction": "both",
                "boxes": [{"frame": 0, "x": 0, "y": 0, "w": 2, "h": 2}],
            }
        )
        + "\n"
    )
    bundle, _ = bridge_bundle(store, EngineConfig())
    assert bundle.tracker.tracker_id == "bridge-tracks-v1"


def test_bridge_bundle_frame_count_mismatch(tmp_path):
    scn, ts, store = _export(tmp_path, num_distractors=0)
    (tmp_path / "frames" / f"{scn.params.frame_count:05d}.png").write_bytes(
        (tmp_path / "frames" / "00000.png").read_bytes()
    )
    with pytest.raises(BackendError, match="holds"):
        bridge_bundle(store, EngineConfig())


def test_localize_through_bridge_export_matches_ground_truth(tmp_path):
    scn, ts, store = _export(tmp_path, seed=37, appearances=2, num_distractors=2)
    bundle, loaded = bridge_bundle(store, EngineConfig())
    ann = annotations_for(scn)[0]
    req = LocalizationRequest(
        video_id=scn.video_id,
        query_id=ann["query_id"],
        query_frame=ann["query_frame"],
        query_box=BBox(**ann["query_box"]),
        query_time=ann["query_time"],
    )
    res = localize(bundle, loaded, req, EngineConfig())
    want = [(r["frame"], r["x"], r["y"], r["w"], r["h"]) for r in ann["gt_track"]]
    got = [(f, b.x, b.y, b.w, b.h) for f, b in res.track.boxes]
    assert got == want
