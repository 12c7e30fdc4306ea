"""
Query expansion recovering a changed final appearance
=====================================================

The target's look drifts away from the query over its first appearance and
its last appearance sits entirely at the drifted angle, so the original
query cannot see it. The second localization pass, run with queries
expanded from the first predicted track, can.
"""

from vql.backends import BackendBundle
from vql.backends.synthetic import (
    ScenarioParams,
    SyntheticExtractor,
    SyntheticFrameSource,
    SyntheticSegmenter,
    annotations_for,
    generate_scenario,
)
from vql.core import BBox, EngineConfig, LocalizationRequest
from vql.pipeline import localize
from vql.tokens import build_token_set

scn = generate_scenario(
    21,
    ScenarioParams(appearances=2, drift_angle=75.0, final_angle=75.0, num_distractors=1),
)
src = SyntheticFrameSource(scn)
bundle = BackendBundle(
    frames=src,
    segmenter=SyntheticSegmenter(scn),
    extractor=SyntheticExtractor(scn),
    tracker=None,
)
ts = build_token_set(src, bundle.segmenter, bundle.extractor)

ann = annotations_for(scn)[0]
request = LocalizationRequest(
    video_id=scn.video_id,
    query_id=ann["query_id"],
    query_frame=ann["query_frame"],
    query_box=BBox(**ann["query_box"]),
    query_time=ann["query_time"],
)
print(f"target appears in spans {scn.target.spans}; the query is frame {request.query_frame}")
print(f"ground-truth answer: the last span, {scn.target.spans[-1]}\n")

# One pass only: the search stops at the first appearance.
single = localize(bundle, ts, request, EngineConfig(), reiterate=False)
print(f"single pass     -> frames [{single.track.start}, {single.track.end}] "
      f"score {single.score:.3f}")

# Full pipeline: expansion + one relocalization pass after the first answer.
full = localize(bundle, ts, request, EngineConfig())
print(f"with reiteration -> frames [{full.track.start}, {full.track.end}] "
      f"score {full.score:.3f}")

print("\npipeline event log:")
for event in full.events:
    print(f"  {event}")
