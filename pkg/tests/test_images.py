import numpy as np
import pytest

from oracles import naive_laplacian_variance
from vql.core import BBox
from vql.images import (
    crop_view,
    draw_box,
    laplacian_variance,
    read_png,
    to_grayscale,
    write_png,
)


def test_grayscale_coefficients():
    img = np.zeros((1, 3, 3), dtype=np.uint8)
    img[0, 0] = (255, 0, 0)
    img[0, 1] = (0, 255, 0)
    img[0, 2] = (0, 0, 255)
    g = to_grayscale(img)
    assert g[0, 0] == pytest.approx(0.299 * 255)
    assert g[0, 1] == pytest.approx(0.587 * 255)
    assert g[0, 2] == pytest.approx(0.114 * 255)


def test_laplacian_variance_linear_ramp_is_zero():
    # The 4-neighbour Laplacian annihilates affine images exactly.
    y, x = np.mgrid[0:12, 0:17]
    ramp = 3.0 * x + 2.0 * y + 5.0
    assert laplacian_variance(ramp) == 0.0


def test_laplacian_variance_checkerboard_frozen():
    # 8x8 checkerboard of 0/255: every valid response is +-1020 and the two
    # signs balance, so the population variance is 1020^2 = 1040400.
    r, c = np.mgrid[0:8, 0:8]
    board = np.where((r + c) % 2 == 0, 0.0, 255.0)
    assert laplacian_variance(board) == pytest.approx(1040400.0)
    assert naive_laplacian_variance(board) == pytest.approx(1040400.0)


def test_laplacian_variance_matches_oracle_on_random_images():
    rng = np.random.default_rng(5)
    for _ in range(10):
        h, w = rng.integers(3, 24, size=2)
        img = rng.uniform(0, 255, size=(int(h), int(w)))
        assert laplacian_variance(img) == pytest.approx(
            naive_laplacian_variance(img), abs=1e-6
        )


def test_laplacian_variance_accepts_rgb():
    rng = np.random.default_rng(6)
    img = rng.integers(0, 255, size=(10, 10, 3), dtype=np.uint8)
    assert laplacian_variance(img) == pytest.approx(
        naive_laplacian_variance(to_grayscale(img)), abs=1e-6
    )


def test_laplacian_variance_rejects_tiny_crops():
    with pytest.raises(ValueError):
        laplacian_variance(np.zeros((2, 5)))


def test_crop_view_full_frame_is_identity():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 255, size=(20, 30, 3), dtype=np.uint8)
    out = crop_view(img, BBox(0, 0, 30, 20), 20, 30)
    assert np.array_equal(out, img)


def test_crop_view_integral_zoom_duplicates_pixels():
    img = np.zeros((4, 4, 3), dtype=np.uint8)
    img[0:2, 0:2] = 200
    out = crop_view(img, BBox(0, 0, 2, 2), 4, 4)
    assert out.shape == (4, 4, 3)
    # interior of the zoomed block keeps the flat color
    assert (out[1, 1] == 200).all()


def test_draw_box_burns_three_pixel_border():
    img = np.zeros((20, 20, 3), dtype=np.uint8)
    out = draw_box(img, BBox(5, 5, 10, 10), (255, 0, 0))
    assert (out[5, 5] == (255, 0, 0)).all()
    assert (out[7, 7] == (255, 0, 0)).all()  # 3px band
    assert (out[10, 10] == 0).all()  # interior untouched
    assert (img == 0).all()  # input not mutated


def test_png_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    img = rng.integers(0, 255, size=(9, 13, 3), dtype=np.uint8)
    p = tmp_path / "x.png"
    write_png(p, img)
    assert np.array_equal(read_png(p), img)
