import numpy as np
import pytest

from oracles import naive_pool, naive_resize
from vql.core import encode_mask
from vql.features import pool_region, pooled_embedding, resize_feature_map


def test_resize_2x2_to_4x4_frozen():
    # Frozen from the per-cell oracle: bilinear of a linear ramp is the ramp
    # itself sampled at half-pixel centers with clamping at the borders.
    fm = np.array([[0.0, 1.0], [2.0, 3.0]])[:, :, None]
    out = resize_feature_map(fm, 4, 4)
    expected = np.array(
        [
            [0.0, 0.25, 0.75, 1.0],
            [0.5, 0.75, 1.25, 1.5],
            [1.5, 1.75, 2.25, 2.5],
            [2.0, 2.25, 2.75, 3.0],
        ]
    )
    assert out.shape == (4, 4, 1)
    np.testing.assert_allclose(out[:, :, 0], expected, atol=1e-12)
    np.testing.assert_allclose(out, naive_resize(fm, 4, 4), atol=1e-12)


def test_resize_identity_is_exact():
    rng = np.random.default_rng(0)
    fm = rng.normal(size=(5, 7, 3))
    out = resize_feature_map(fm, 5, 7)
    assert np.array_equal(out, fm)


def test_resize_matches_oracle_on_random_maps():
    rng = np.random.default_rng(1)
    for _ in range(20):
        h, w = rng.integers(1, 9, size=2)
        H, W = rng.integers(1, 33, size=2)
        d = int(rng.integers(1, 5))
        fm = rng.normal(size=(h, w, d))
        np.testing.assert_allclose(
            resize_feature_map(fm, int(H), int(W)), naive_resize(fm, int(H), int(W)), atol=1e-9
        )


def test_resize_rejects_bad_dims():
    fm = np.zeros((2, 2, 1))
    with pytest.raises(ValueError):
        resize_feature_map(fm, 0, 4)


def test_pool_left_column():
    fm = np.array([[1.0, 2.0], [3.0, 4.0]])[:, :, None]
    grid = np.array([[True, False], [True, False]])
    assert pool_region(fm, grid)[0] == pytest.approx(2.0)


def test_pool_rejects_mismatch_and_empty():
    fm = np.zeros((2, 2, 1))
    with pytest.raises(ValueError):
        pool_region(fm, np.ones((3, 2), dtype=bool))
    with pytest.raises(ValueError):
        pool_region(np.ones((2, 2, 1)), np.zeros((2, 2), dtype=bool))


def test_pool_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        h, w, d = rng.integers(1, 12, size=2).tolist() + [int(rng.integers(1, 6))]
        fm = rng.normal(size=(h, w, d))
        grid = rng.random(size=(h, w)) < 0.4
        if not grid.any():
            grid[0, 0] = True
        np.testing.assert_allclose(pool_region(fm, grid), naive_pool(fm, grid), atol=1e-12)


def test_pooled_embedding_equals_full_resize_then_pool():
    # The fused op must agree with materializing the whole resized map.
    rng = np.random.default_rng(3)
    for _ in range(10):
        h, w = rng.integers(2, 7, size=2)
        H, W = rng.integers(8, 25, size=2)
        d = int(rng.integers(1, 5))
        fm = rng.normal(size=(h, w, d))
        grid = np.zeros((H, W), dtype=bool)
        r0, c0 = rng.integers(0, H - 1), rng.integers(0, W - 1)
        r1 = rng.integers(r0, H)
        c1 = rng.integers(c0, W)
        grid[r0 : r1 + 1, c0 : c1 + 1] = rng.random(size=(r1 - r0 + 1, c1 - c0 + 1)) < 0.7
        if not grid.any():
            grid[r0, c0] = True
        mask = encode_mask(grid)
        fused = pooled_embedding(fm, mask)
        full = naive_pool(naive_resize(fm, int(H), int(W)), grid)
        np.testing.assert_allclose(fused, full, atol=1e-9)


def test_pooled_embedding_identity_resolution_exact():
    # When feature and mask grids already agree, no interpolation happens.
    rng = np.random.default_rng(4)
    fm = rng.normal(size=(6, 6, 3))
    grid = np.zeros((6, 6), dtype=bool)
    grid[2:5, 1:4] = True
    mask = encode_mask(grid)
    np.testing.assert_allclose(pooled_embedding(fm, mask), naive_pool(fm, grid), atol=1e-12)
