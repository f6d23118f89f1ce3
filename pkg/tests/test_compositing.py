import numpy as np
import pytest

from echoscreen.compositing import crop_reflection, insert_screen, screen_blend
from echoscreen.errors import ImageTooSmall, QuadOutOfBounds, ShapeMismatch
from echoscreen.geometry import Quad, random_quad


def test_alpha_one_returns_screen_exactly():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = rng.random((16, 16))
        r = rng.random((16, 16))
        assert np.array_equal(screen_blend(s, r, 1.0), s)


def test_zero_reflection_returns_screen_exactly():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = rng.random((16, 16, 3))
        alpha = rng.random()
        assert np.array_equal(screen_blend(s, np.zeros_like(s), alpha), s)


def test_saturated_screen_stays_saturated():
    rng = np.random.default_rng(3)
    s = np.ones((12, 12))
    r = rng.random((12, 12))
    assert np.array_equal(screen_blend(s, r, 0.3), s)


def test_scalar_blend_value():
    s = np.full((4, 4), 0.5)
    r = np.full((4, 4), 0.5)
    b = screen_blend(s, r, 0.0)
    assert np.allclose(b, 0.75, atol=1e-15)


def test_blend_never_darkens():
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = rng.random((24, 24))
        r = rng.random((24, 24))
        alpha = rng.random()
        assert np.all(screen_blend(s, r, alpha) >= s)


def test_blend_monotone_in_reflection():
    rng = np.random.default_rng(5)
    s = rng.random((8, 8))
    r = rng.random((8, 8)) * 0.5
    base = screen_blend(s, r, 0.4)
    r2 = r.copy()
    r2[3, 3] += 0.3
    assert np.all(screen_blend(s, r2, 0.4) >= base)


def test_blend_validations():
    with pytest.raises(ShapeMismatch):
        screen_blend(np.zeros((4, 4)), np.zeros((4, 5)), 0.5)
    with pytest.raises(ValueError):
        screen_blend(np.zeros((4, 4)), np.zeros((4, 4)), 1.5)


def test_crop_identity_when_sizes_match():
    rng = np.random.default_rng(6)
    bg = rng.random((48, 64, 3))
    out = crop_reflection(bg, 64, 48, seed=9)
    assert np.array_equal(out, bg)


def test_crop_deterministic():
    rng = np.random.default_rng(7)
    bg = rng.random((100, 150))
    a = crop_reflection(bg, 40, 30, seed=123)
    b = crop_reflection(bg, 40, 30, seed=123)
    assert np.array_equal(a, b)
    c = crop_reflection(bg, 40, 30, seed=124)
    assert not np.array_equal(a, c)


def test_crop_output_dims_and_channels():
    rng = np.random.default_rng(8)
    for _ in range(20):
        h, w = int(rng.integers(8, 200)), int(rng.integers(8, 200))
        tw, th = int(rng.integers(8, 120)), int(rng.integers(8, 120))
        gray = crop_reflection(rng.random((h, w)), tw, th, seed=1)
        assert gray.shape == (th, tw)
        rgb = crop_reflection(rng.random((h, w, 3)), tw, th, seed=1)
        assert rgb.shape == (th, tw, 3)


def test_crop_too_small():
    with pytest.raises(ImageTooSmall):
        crop_reflection(np.zeros((4, 40)), 10, 10, seed=0)


def test_insert_identity_placement():
    rng = np.random.default_rng(9)
    screen = rng.random((48, 64))
    bg = rng.random((48, 64))
    quad = Quad.from_rect(0.0, 0.0, 63.0, 47.0)
    out, mask = insert_screen(bg, screen, quad)
    assert np.abs(out - screen).max() < 1.0 / 255.0
    assert mask.min() == 1.0


def test_insert_mask_matches_point_in_polygon_oracle():
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import Point, Polygon

    rng = np.random.default_rng(10)
    bg = rng.random((120, 160, 3))
    screen = rng.random((48, 64))
    for seed in range(5):
        quad = random_quad(seed, 160, 120)
        _, mask = insert_screen(bg, screen, quad)
        poly = Polygon(quad.corners)
        expected = sum(
            poly.covers(Point(x, y)) for y in range(120) for x in range(160)
        )
        assert int(mask.sum()) == expected


def test_insert_leaves_outside_pixels_untouched():
    rng = np.random.default_rng(11)
    bg = rng.random((120, 160, 3))
    screen = rng.random((48, 64))
    quad = random_quad(3, 160, 120)
    out, mask = insert_screen(bg, screen, quad)
    outside = mask == 0.0
    assert np.array_equal(out[outside], bg[outside])


def test_insert_idempotent():
    rng = np.random.default_rng(12)
    bg = rng.random((120, 160))
    screen = rng.random((48, 64))
    quad = random_quad(5, 160, 120)
    once, _ = insert_screen(bg, screen, quad)
    twice, _ = insert_screen(once, screen, quad)
    assert np.array_equal(once, twice)


def test_insert_rejects_out_of_bounds_quad():
    quad = Quad.from_rect(-5.0, 10.0, 100.0, 100.0)
    with pytest.raises(QuadOutOfBounds):
        insert_screen(np.zeros((120, 160)), np.zeros((48, 64)), quad)


def test_insert_broadcasts_gray_screen_into_rgb_scene():
    rng = np.random.default_rng(13)
    bg = rng.random((120, 160, 3))
    screen = rng.random((48, 64))
    quad = random_quad(8, 160, 120)
    out, mask = insert_screen(bg, screen, quad)
    inside = mask == 1.0
    px = out[inside]
    assert np.array_equal(px[:, 0], px[:, 1])
    assert np.array_equal(px[:, 1], px[:, 2])
