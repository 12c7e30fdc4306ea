import json

import pytest

from clips import moving_rect_clip, write_frames
from vql_bridge.cli import main


@pytest.fixture()
def clip(tmp_path):
    frames, gt = moving_rect_clip(num_frames=6)
    write_frames(frames, tmp_path / "frames")
    return tmp_path, gt


def test_prepare_prints_the_summary_line(clip, capsys):
    root, _ = clip
    rc = main(["prepare", str(root / "frames"), str(root / "store")])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "frames=6 tokens=12 d=10"
    assert (root / "store" / "manifest.json").exists()


def test_prepare_refuses_overwrite_without_force(clip, capsys):
    root, _ = clip
    assert main(["prepare", str(root / "frames"), str(root / "store")]) == 0
    assert main(["prepare", str(root / "frames"), str(root / "store")]) == 2
    assert "force" in capsys.readouterr().err
    assert main(["prepare", str(root / "frames"), str(root / "store"), "--force"]) == 0


def test_prepare_missing_frames_dir_is_usage_error(tmp_path, capsys):
    rc = main(["prepare", str(tmp_path / "nope"), str(tmp_path / "store")])
    assert rc == 2
    assert "frames directory" in capsys.readouterr().err


def test_prepare_unknown_model_is_usage_error(clip, capsys):
    root, _ = clip
    rc = main(["prepare", str(root / "frames"), str(root / "store"), "--extractor", "vit-g"])
    assert rc == 2
    assert "dense-desc-v1" in capsys.readouterr().err


def test_prepare_weights_on_classical_model_is_usage_error(clip, capsys):
    root, _ = clip
    rc = main(["prepare", str(root / "frames"), str(root / "store"), "--weights", "/x.pt"])
    assert rc == 2
    assert "weights" in capsys.readouterr().err


def test_prepare_missing_weights_for_wrapper_is_usage_error(clip, capsys, monkeypatch):
    monkeypatch.delenv("BRIDGE_DINO_WEIGHTS", raising=False)
    root, _ = clip
    rc = main(["prepare", str(root / "frames"), str(root / "store"), "--extractor", "dino-vit-b8"])
    assert rc == 2
    assert "BRIDGE_DINO_WEIGHTS" in capsys.readouterr().err


def test_track_writes_and_reports_the_span(clip, capsys):
    root, gt = clip
    out = root / "store" / "tracks.jsonl"
    x, y, w, h = gt[2]
    rc = main([
        "track", str(root / "frames"), "--seed-frame", "2",
        "--box", f"{x},{y},{w},{h}", "--out", str(out),
    ])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "track [0, 5] boxes=6"
    rec = json.loads(out.read_text())
    assert rec["direction"] == "both"
    assert len(rec["boxes"]) == 6


def test_track_append_accumulates(clip):
    root, gt = clip
    out = root / "tracks.jsonl"
    base = ["track", str(root / "frames"), "--out", str(out)]
    x, y, w, h = gt[0]
    assert main(base + ["--seed-frame", "0", "--box", f"{x},{y},{w},{h}", "--direction", "forward"]) == 0
    x, y, w, h = gt[3]
    assert main(base + ["--seed-frame", "3", "--box", f"{x},{y},{w},{h}", "--append"]) == 0
    seeds = [json.loads(l)["seed_frame"] for l in out.read_text().splitlines()]
    assert seeds == [0, 3]


def test_track_bad_box_is_usage_error(clip, capsys):
    root, _ = clip
    rc = main(["track", str(root / "frames"), "--seed-frame", "0", "--box", "1,2,3"])
    assert rc == 2
    assert "x,y,w,h" in capsys.readouterr().err
    rc = main(["track", str(root / "frames"), "--seed-frame", "0", "--box", "1,2,-3,4"])
    assert rc == 2


def test_track_unknown_tracker_is_usage_error(clip, capsys):
    root, _ = clip
    rc = main([
        "track", str(root / "frames"), "--seed-frame", "0",
        "--box", "1,2,3,4", "--tracker", "csrt",
    ])
    assert rc == 2
    assert "ncc-v1" in capsys.readouterr().err
