import numpy as np
import pytest

from vql.backends import FrameView
from vql.backends.synthetic import (
    ScenarioParams,
    SyntheticExtractor,
    SyntheticFrameSource,
    SyntheticSegmenter,
    annotations_for,
    generate_scenario,
    ground_truth_track,
    render_frame,
    scenario_from_json,
    scenario_to_json,
)
from vql.core import BBox, box_iou, encode_mask, tight_bbox
from vql.features import pool_region


def _full_view(src, t):
    return src.view(t, BBox(0, 0, src.width, src.height))


def test_generation_is_deterministic():
    p = ScenarioParams(noise=0.3)
    a = generate_scenario(11, p)
    b = generate_scenario(11, p)
    assert a.target.spans == b.target.spans
    for t in a.target.boxes:
        assert a.target.boxes[t] == b.target.boxes[t]
        np.testing.assert_array_equal(a.target.embeddings[t], b.target.embeddings[t])


def test_scenario_json_roundtrip():
    scn = generate_scenario(3, ScenarioParams(noise=0.1, num_distractors=2))
    again = scenario_from_json(scenario_to_json(scn))
    assert again.video_id == scn.video_id
    t = scn.target.spans[0][0]
    np.testing.assert_array_equal(again.target.embeddings[t], scn.target.embeddings[t])


def test_mask_tight_box_matches_planted_box():
    scn = generate_scenario(7, ScenarioParams(num_distractors=3))
    src = SyntheticFrameSource(scn)
    seg = SyntheticSegmenter(scn)
    t = scn.target.spans[0][0]
    masks = seg.segment(_full_view(src, t))
    visible = [o for o in scn.objects if o.visible(t)]
    assert len(masks) == len(visible)
    for obj, grid in zip(visible, masks):
        assert tight_bbox(encode_mask(grid)) == obj.boxes[t]


def test_no_visible_objects_yields_no_masks():
    scn = generate_scenario(7, ScenarioParams(num_distractors=0))
    gaps = [
        t
        for t in range(scn.params.frame_count)
        if not scn.target.visible(t)
    ]
    assert gaps, "scenario should contain frames without the target"
    seg = SyntheticSegmenter(scn)
    src = SyntheticFrameSource(scn)
    assert seg.segment(_full_view(src, gaps[0])) == []


def test_background_mask_param():
    scn = generate_scenario(7, ScenarioParams(num_distractors=0, background_mask=True))
    seg = SyntheticSegmenter(scn)
    src = SyntheticFrameSource(scn)
    t = scn.target.spans[0][0]
    masks = seg.segment(_full_view(src, t))
    assert len(masks) == 2  # object + background complement
    assert (masks[0] | masks[1]).all()
    assert not (masks[0] & masks[1]).any()


def test_pooled_token_equals_planted_embedding_at_scale_one():
    scn = generate_scenario(9, ScenarioParams(noise=0.0, num_distractors=2))
    src = SyntheticFrameSource(scn)
    seg = SyntheticSegmenter(scn)
    ext = SyntheticExtractor(scn)
    t = scn.target.spans[0][0]
    view = _full_view(src, t)
    fm = ext.extract(view)
    grid = seg.segment(view)[0]
    pooled = pool_region(fm, grid)
    # Mean over identical vectors rounds in the last bits for general counts.
    np.testing.assert_allclose(pooled, scn.target.embeddings[t], atol=1e-12)


def test_noise_bound_holds():
    # The zero-noise twin of the same seed carries the unperturbed directions.
    p = ScenarioParams(noise=0.25)
    scn = generate_scenario(13, p)
    base_scn = generate_scenario(13, ScenarioParams(noise=0.0))
    checked = 0
    for t, emb in scn.target.embeddings.items():
        if t in base_scn.target.embeddings:
            cos = float(np.dot(emb, base_scn.target.embeddings[t]))
            assert cos >= 1.0 - p.noise**2 / 2 - 1e-12
            checked += 1
    assert checked > 0


def test_orthogonal_objects_have_bounded_cross_similarity():
    p = ScenarioParams(noise=0.2, num_distractors=2)
    scn = generate_scenario(17, p)
    tgt, d1 = scn.objects[0], scn.objects[1]
    shared = sorted(set(tgt.boxes) & set(d1.boxes))
    assert shared
    bound = 2 * p.noise + p.noise**2
    for t in shared:
        cos = float(np.dot(tgt.embeddings[t], d1.embeddings[t]))
        assert abs(cos) <= bound + 1e-12


def test_zero_noise_distractors_exactly_orthogonal():
    scn = generate_scenario(19, ScenarioParams(noise=0.0, num_distractors=3))
    t0 = scn.target.spans[0][0]
    for other in scn.objects[1:]:
        shared = sorted(set(scn.target.boxes) & set(other.boxes))
        for t in shared[:3]:
            cos = float(np.dot(scn.target.embeddings[t], other.embeddings[t]))
            assert cos == pytest.approx(0.0, abs=1e-12)


def test_bleed_distractor_mimics_then_diverges():
    p = ScenarioParams(noise=0.0, num_distractors=2, bleed_distractor=True, bleed_cos=0.95)
    scn = generate_scenario(23, p)
    bleed = next(o for o in scn.objects if o.role == "bleed")
    t = bleed.spans[0][0]
    tgt_dir = scn.target.embeddings[scn.target.spans[0][0]]
    full = bleed.embedding_for(t, zoom=1.0)
    crop = bleed.embedding_for(t, zoom=2.5)
    assert float(np.dot(full, tgt_dir)) == pytest.approx(0.95, abs=1e-9)
    assert abs(float(np.dot(crop, tgt_dir))) < 1e-9
    assert bleed.spans[0][0] > scn.target.spans[-1][1]  # appears after the target


def test_part_reveal_mask_depends_on_zoom():
    scn = generate_scenario(29, ScenarioParams(part_reveal=True))
    t = scn.target.spans[0][0]
    full_box = scn.target.boxes[t]
    part = scn.target.mask_box(t, zoom=1.0)
    whole = scn.target.mask_box(t, zoom=2.0)
    assert part.h < full_box.h and whole == full_box


def test_render_deterministic_and_independent_of_order():
    scn = generate_scenario(31, ScenarioParams())
    a = render_frame(scn, 5)
    render_frame(scn, 6)
    b = render_frame(scn, 5)
    assert np.array_equal(a, b)


def test_crop_view_geometry_roundtrip():
    scn = generate_scenario(37, ScenarioParams())
    src = SyntheticFrameSource(scn)
    t = scn.target.spans[0][0]
    rect = BBox(10.0, 8.0, 48.0, 36.0)
    view = src.view(t, rect)
    assert view.zoom == pytest.approx(2.0)
    box = scn.target.boxes[t]
    back = view.to_frame_coords(view.to_view_coords(box))
    assert abs(back.x - box.x) < 1e-9 and abs(back.w - box.w) < 1e-9


def test_ground_truth_latest_span():
    scn = generate_scenario(41, ScenarioParams(appearances=2))
    spans = scn.target.spans
    assert len(spans) == 2
    gt = ground_truth_track(scn, scn.params.frame_count - 1)
    assert gt[0][0] == spans[-1][0] and gt[-1][0] == spans[-1][1]
    # query time inside the first gap: ground truth is the first span
    mid_gap = spans[0][1] + 1
    gt_early = ground_truth_track(scn, mid_gap)
    assert gt_early[-1][0] == spans[0][1]
    # query time inside a span clips it
    gt_clip = ground_truth_track(scn, spans[-1][0] + 1)
    assert gt_clip[-1][0] == spans[-1][0] + 1


def test_annotations_record_shape():
    scn = generate_scenario(43, ScenarioParams())
    (ann,) = annotations_for(scn)
    assert ann["video_id"] == scn.video_id
    assert set(ann["query_box"]) == {"x", "y", "w", "h"}
    assert ann["gt_track"][0]["frame"] == scn.target.spans[-1][0]
    assert ann["query_time"] == scn.params.frame_count - 1


def test_blur_final_span_reduces_laplacian_variance():
    from vql.images import laplacian_variance

    scn = generate_scenario(47, ScenarioParams(blur_final=True, appearances=2))
    sharp_t = scn.target.spans[0][0]
    blurry_t = scn.target.spans[-1][0]
    assert laplacian_variance(render_frame(scn, sharp_t)) > 100.0
    assert laplacian_variance(render_frame(scn, blurry_t)) < 100.0
