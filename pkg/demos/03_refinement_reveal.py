"""
Crop refinement unmasking a full-frame lookalike
================================================

A "bleed" object scores almost as high as the target when tokenized from
full frames — the way features of nearby objects bleed together at coarse
resolution — but a zoomed, object-centric crop reveals its true embedding.
Refinement re-tokenizes each candidate from such a crop and rescores it.
"""

from vql.backends import BackendBundle
from vql.backends.synthetic import (
    ScenarioParams,
    SyntheticExtractor,
    SyntheticFrameSource,
    SyntheticSegmenter,
    annotations_for,
    generate_scenario,
    ground_truth_track,
)
from vql.core import BBox, EngineConfig, LocalizationRequest, box_iou
from vql.pipeline import localize
from vql.search import search
from vql.tokens import build_token_set, tokenize_query

scn = generate_scenario(9, ScenarioParams(bleed_distractor=True, num_distractors=1))
src = SyntheticFrameSource(scn)
bundle = BackendBundle(
    frames=src,
    segmenter=SyntheticSegmenter(scn),
    extractor=SyntheticExtractor(scn),
    tracker=None,
)
ts = build_token_set(src, bundle.segmenter, bundle.extractor)

lookalike = next(o for o in scn.objects if o.role == "bleed")
print(f"target spans:    {scn.target.spans}")
print(f"lookalike spans: {lookalike.spans}  (after the target, mimicking it)\n")

ann = annotations_for(scn)[0]
request = LocalizationRequest(
    video_id=scn.video_id,
    query_id=ann["query_id"],
    query_frame=ann["query_frame"],
    query_box=BBox(**ann["query_box"]),
    query_time=ann["query_time"],
)

# Raw search cannot tell them apart: both clear the similarity threshold.
t0 = scn.target.spans[0][0]
view = src.view(t0, BBox(0, 0, src.width, src.height))
query, _ = tokenize_query(view, request.query_box, bundle.segmenter, bundle.extractor)
for cand in search(ts, [query], EngineConfig()):
    role = next(o.role for o in scn.objects if o.visible(cand.frame_index)
                and box_iou(o.boxes[cand.frame_index], cand.bbox) > 0.5)
    print(f"  candidate frame {cand.frame_index:3d} score {cand.score:.3f}  ({role})")

# Without refinement the later lookalike wins the seeding race.
off = localize(bundle, ts, request, EngineConfig(), refine=False)
hit = list(off.track.boxes) == ground_truth_track(scn, request.query_time)
print(f"\nrefine off -> frames [{off.track.start}, {off.track.end}]  correct: {hit}")

# With refinement the crop view rescoring rejects it.
on = localize(bundle, ts, request, EngineConfig())
hit = list(on.track.boxes) == ground_truth_track(scn, request.query_time)
print(f"refine on  -> frames [{on.track.start}, {on.track.end}]  correct: {hit}")
