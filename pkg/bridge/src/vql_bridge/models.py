"""Model registry: classical implementations plus lazy heavyweight wrappers.

The classical models (contour-v1 / dense-desc-v1 / ncc-v1) run anywhere and
are bit-deterministic. The wrapper classes for pretrained transformers load
their backends lazily and fail with an actionable ModelLoadError when the
package or weights are absent, so merely selecting them never imports torch.

Determinism: classical models are deterministic unconditionally. Wrappers
call _configure_determinism(flag) at load time, which seeds their backend
and disables nondeterministic kernels when the flag is set (the default).
"""

from __future__ import annotations

import os

from vql_bridge.features import DenseDescriptor
from vql_bridge.segment import ContourSegmenter
from vql_bridge.track import NccTracker


class ModelLoadError(RuntimeError):
    """A model backend or its weights could not be loaded."""


def _require_backend(module: str, model: str, weights_env: str, weights: str | None):
    try:
        __import__(module)
    except ImportError as exc:
        raise ModelLoadError(
            f"{model} needs the '{module}' package, which is not installed; "
            f"install it and set {weights_env} (or pass weights=) to the checkpoint path"
        ) from exc
    path = weights or os.environ.get(weights_env)
    if not path or not os.path.isfile(path):
        raise ModelLoadError(
            f"{model} weights unavailable: set {weights_env} or pass weights= "
            f"with a local checkpoint file (got {path!r})"
        )
    return path


def _configure_determinism(deterministic: bool) -> None:
    if not deterministic:
        return
    import torch  # noqa: F401 — reached only after _require_backend succeeded

    torch.manual_seed(0)
    torch.use_deterministic_algorithms(True)


class SamSegmenter:
    """Promptless mask generation with a pretrained ViT-H segmenter."""

    segmenter_id = "sam-vit-h"

    def __init__(self, weights: str | None = None, deterministic: bool = True):
        self.weights = weights
        self.deterministic = deterministic
        self._model = None

    def _load(self):
        if self._model is None:
            path = _require_backend("torch", self.segmenter_id, "BRIDGE_SAM_WEIGHTS", self.weights)
            _configure_determinism(self.deterministic)
            import segment_anything  # type: ignore

            self._model = segment_anything.SamAutomaticMaskGenerator(
                segment_anything.sam_model_registry["vit_h"](checkpoint=path)
            )
        return self._model

    def masks(self, img):
        model = self._load()
        return [m["segmentation"] for m in model.generate(img)]


class DinoExtractor:
    """Dense patch features from a pretrained ViT-B/8 backbone."""

    extractor_id = "dino-vit-b8"
    dim = 768

    def __init__(self, weights: str | None = None, deterministic: bool = True):
        self.weights = weights
        self.deterministic = deterministic
        self._model = None

    def _load(self):
        if self._model is None:
            path = _require_backend("torch", self.extractor_id, "BRIDGE_DINO_WEIGHTS", self.weights)
            _configure_determinism(self.deterministic)
            import torch

            self._model = torch.jit.load(path).eval()
        return self._model

    def features(self, img):
        model = self._load()
        import torch

        with torch.no_grad():
            x = torch.from_numpy(img).float().permute(2, 0, 1)[None] / 255.0
            return model(x)[0].permute(1, 2, 0).numpy()

    def features_batch(self, imgs):
        return [self.features(im) for im in imgs]


class Sam2Tracker:
    """Mask propagation with a pretrained video segmentation model."""

    tracker_id = "sam2-hiera"

    def __init__(self, weights: str | None = None, deterministic: bool = True):
        self.weights = weights
        self.deterministic = deterministic
        self._model = None

    def _load(self):
        if self._model is None:
            path = _require_backend("torch", self.tracker_id, "BRIDGE_SAM2_WEIGHTS", self.weights)
            _configure_determinism(self.deterministic)
            import sam2  # type: ignore

            self._model = sam2.build_sam2_video_predictor("sam2-hiera-large", path)
        return self._model

    def track(self, frames, seed_frame, seed_box, direction):
        self._load()
        raise ModelLoadError(f"{self.tracker_id} propagation requires GPU inference")


_SEGMENTERS = {
    ContourSegmenter.segmenter_id: ContourSegmenter,
    SamSegmenter.segmenter_id: SamSegmenter,
}
_EXTRACTORS = {
    DenseDescriptor.extractor_id: DenseDescriptor,
    DinoExtractor.extractor_id: DinoExtractor,
}
_TRACKERS = {
    NccTracker.tracker_id: NccTracker,
    Sam2Tracker.tracker_id: Sam2Tracker,
}


def _pick(table: dict, kind: str, model_id: str, **kwargs):
    if model_id not in table:
        raise ValueError(f"unknown {kind} {model_id!r}; available: {sorted(table)}")
    try:
        return table[model_id](**kwargs)
    except TypeError as exc:
        raise ValueError(f"{kind} {model_id!r} does not take {sorted(kwargs)}: {exc}") from exc


def get_segmenter(model_id: str, **kwargs):
    return _pick(_SEGMENTERS, "segmenter", model_id, **kwargs)


def get_extractor(model_id: str, **kwargs):
    return _pick(_EXTRACTORS, "extractor", model_id, **kwargs)


def get_tracker(model_id: str, **kwargs):
    return _pick(_TRACKERS, "tracker", model_id, **kwargs)
