"""Training-free visual query localization over region tokens."""

from vql.core import (
    BBox,
    BinaryMask,
    EngineConfig,
    EngineError,
    FrameRef,
    LocalizationRequest,
    QueryToken,
    RegionToken,
    ResponseTrack,
    ScoredCandidate,
    box_iou,
    decode_mask,
    encode_mask,
    tight_bbox,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BinaryMask",
    "EngineConfig",
    "EngineError",
    "FrameRef",
    "LocalizationRequest",
    "QueryToken",
    "RegionToken",
    "ResponseTrack",
    "ScoredCandidate",
    "box_iou",
    "decode_mask",
    "encode_mask",
    "tight_bbox",
    "__version__",
]
