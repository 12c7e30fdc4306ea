"""Offline bridge between pretrained vision models and token stores.

The bridge reads numbered PNG frames, runs a segmenter and a feature
extractor over them, and writes the token-store directory format the
localization engine consumes; a tracker similarly emits tracks.jsonl.
Everything is filesystem exchange — no RPC, no shared code with the engine.
"""

from vql_bridge.models import ModelLoadError, get_extractor, get_segmenter, get_tracker
from vql_bridge.prepare import bridge_prepare
from vql_bridge.track import bridge_track

__all__ = [
    "ModelLoadError",
    "bridge_prepare",
    "bridge_track",
    "get_extractor",
    "get_segmenter",
    "get_tracker",
]
