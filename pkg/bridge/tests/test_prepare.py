import json

import numpy as np
import pytest
from PIL import Image

from clips import moving_rect_clip, write_frames
from vql_bridge import bridge_prepare
from vql_bridge.features import DenseDescriptor


class OomUnlessSingle(DenseDescriptor):
    """Extractor stub that refuses multi-frame batches, like a saturated GPU."""

    def __init__(self):
        super().__init__()
        self.calls = []

    def features_batch(self, imgs):
        self.calls.append(len(imgs))
        if len(imgs) > 1:
            raise MemoryError("batch too large")
        return super().features_batch(imgs)


@pytest.fixture()
def clip(tmp_path):
    frames, _ = moving_rect_clip(num_frames=6)
    write_frames(frames, tmp_path / "frames")
    return tmp_path


def test_summary_counts(clip):
    summary = bridge_prepare(clip / "frames", clip / "store")
    assert summary == {"frames": 6, "tokens": 12, "dim": 10}
    manifest = json.loads((clip / "store" / "manifest.json").read_text())
    assert manifest["backend"] == "bridge:contour-v1+dense-desc-v1"
    assert manifest["frames_dir"] == "../frames"


def test_oom_batches_retry_frame_by_frame(clip):
    ext = OomUnlessSingle()
    summary = bridge_prepare(clip / "frames", clip / "store", extractor=ext, batch_size=4)
    assert summary["tokens"] == 12
    # one failed call of 4, then 4 singles; one failed call of 2, then 2 singles
    assert ext.calls == [4, 1, 1, 1, 1, 2, 1, 1]


def test_single_frame_oom_propagates(clip):
    class AlwaysOom(DenseDescriptor):
        def features_batch(self, imgs):
            raise MemoryError("no memory at any size")

    with pytest.raises(MemoryError):
        bridge_prepare(clip / "frames", clip / "store", extractor=AlwaysOom())


def test_existing_store_needs_force(clip):
    bridge_prepare(clip / "frames", clip / "store")
    with pytest.raises(ValueError, match="force"):
        bridge_prepare(clip / "frames", clip / "store")
    bridge_prepare(clip / "frames", clip / "store", force=True)


def test_mismatched_frame_sizes_are_rejected(clip):
    Image.new("RGB", (50, 40)).save(clip / "frames" / "00006.png")
    with pytest.raises(ValueError, match="frame 6"):
        bridge_prepare(clip / "frames", clip / "store")


def test_blank_frames_contribute_no_tokens(tmp_path):
    frames, _ = moving_rect_clip(num_frames=4)
    blank = np.full_like(frames[0], 16)
    write_frames(frames + [blank], tmp_path / "frames")
    summary = bridge_prepare(tmp_path / "frames", tmp_path / "store")
    assert summary == {"frames": 5, "tokens": 8, "dim": 10}
    rows = [json.loads(l) for l in (tmp_path / "store" / "regions.jsonl").read_text().splitlines()]
    assert {r["frame_index"] for r in rows} == {0, 1, 2, 3}


def test_export_features_writes_one_map_per_frame(clip):
    bridge_prepare(clip / "frames", clip / "store", export_features=clip / "fm")
    maps = sorted(p.name for p in (clip / "fm").iterdir())
    assert maps == [f"{i:05d}.npy" for i in range(6)]
    fm = np.load(clip / "fm" / "00000.npy")
    assert fm.shape == (72 // 4, 96 // 4, 10)


def test_video_id_defaults_to_parent_directory(clip):
    bridge_prepare(clip / "frames", clip / "store")
    manifest = json.loads((clip / "store" / "manifest.json").read_text())
    assert manifest["video_id"] == clip.name
    bridge_prepare(clip / "frames", clip / "store", video_id="override", force=True)
    manifest = json.loads((clip / "store" / "manifest.json").read_text())
    assert manifest["video_id"] == "override"
