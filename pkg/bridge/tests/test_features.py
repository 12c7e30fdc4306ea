import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vql_bridge.features import DenseDescriptor, pool_mask, resize_bilinear


def test_descriptor_grid_shape():
    ext = DenseDescriptor(stride=4)
    fm = ext.features(np.zeros((72, 96, 3), np.uint8))
    assert fm.shape == (18, 24, ext.dim)


def test_descriptor_bias_channel_keeps_norm_positive():
    fm = DenseDescriptor().features(np.zeros((32, 32, 3), np.uint8))
    assert np.all(fm[:, :, 0] == 0.1)
    assert np.all(np.linalg.norm(fm, axis=2) > 0)


def test_descriptor_sees_color():
    img = np.zeros((8, 8, 3), np.uint8)
    img[:, :4] = (255, 0, 0)
    img[:, 4:] = (0, 0, 255)
    fm = DenseDescriptor(stride=4).features(img)
    red, blue = fm[0, 0], fm[0, 1]
    assert red[1] == pytest.approx(1.0) and red[3] == pytest.approx(0.0)
    assert blue[1] == pytest.approx(0.0) and blue[3] == pytest.approx(1.0)


def test_descriptor_is_deterministic():
    img = np.random.default_rng(5).integers(0, 256, (40, 56, 3), dtype=np.uint8)
    a = DenseDescriptor().features(img)
    b = DenseDescriptor().features(img)
    assert np.array_equal(a, b)


def test_resize_identity():
    fm = np.random.default_rng(1).random((6, 7, 3))
    assert resize_bilinear(fm, 6, 7) == pytest.approx(fm)


def test_resize_constant_field_stays_constant():
    fm = np.full((3, 5, 2), 0.7)
    out = resize_bilinear(fm, 17, 29)
    assert out.shape == (17, 29, 2)
    assert out == pytest.approx(0.7)


def test_resize_linear_ramp_is_exact_inside():
    # bilinear interpolation reproduces an affine function exactly away from
    # the clamped border
    h, w = 8, 10
    ys, xs = np.mgrid[0:h, 0:w]
    fm = (2.0 * xs + 3.0 * ys)[:, :, None].astype(np.float64)
    out = resize_bilinear(fm, 2 * h, 2 * w)
    oy, ox = np.mgrid[0 : 2 * h, 0 : 2 * w]
    sy = (oy + 0.5) * 0.5 - 0.5
    sx = (ox + 0.5) * 0.5 - 0.5
    inside = (sy >= 0) & (sy <= h - 1) & (sx >= 0) & (sx <= w - 1)
    want = 2.0 * sx + 3.0 * sy
    assert out[inside, 0] == pytest.approx(want[inside], abs=1e-12)


def test_pool_mask_is_a_plain_mean():
    fm = np.arange(24, dtype=np.float64).reshape(4, 3, 2)
    mask = np.zeros((4, 3), dtype=bool)
    mask[0, 0] = mask[3, 2] = True
    assert pool_mask(fm, mask) == pytest.approx((fm[0, 0] + fm[3, 2]) / 2)
    with pytest.raises(ValueError):
        pool_mask(fm, np.zeros((4, 3), dtype=bool))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_pooled_values_stay_within_feature_range(seed):
    rng = np.random.default_rng(seed)
    fm = rng.random((5, 6, 4))
    mask = rng.random((5, 6)) < 0.5
    if not mask.any():
        mask[0, 0] = True
    pooled = pool_mask(fm, mask)
    assert np.all(pooled >= fm.min() - 1e-12)
    assert np.all(pooled <= fm.max() + 1e-12)
