import json

import numpy as np
import pytest

from echoscreen.errors import (
    DegenerateConfiguration,
    GenerationExhausted,
    PointAtInfinity,
    SingularMatrix,
)
from echoscreen.geometry import (
    Quad,
    QuadGenConfig,
    apply_homography,
    homography_from_points,
    invert_homography,
    min_corner_scale,
    quad_contains,
    random_quad,
)
from echoscreen.geometry import _draw_quad

UNIT = Quad.from_rect(0.0, 0.0, 1.0, 1.0)
CANONICAL = Quad.from_rect(0.0, 0.0, 639.0, 479.0)


def _random_valid_quad(rng, w=640, h=480):
    return random_quad(int(rng.integers(2**32)), w, h)


def test_identity_homography():
    h = homography_from_points(UNIT, UNIT)
    assert np.allclose(h, np.eye(3), atol=1e-9)


def test_pure_translation():
    dst = Quad(UNIT.corners + np.array([10.0, 5.0]))
    h = homography_from_points(UNIT, dst)
    expected = np.eye(3)
    expected[0, 2] = 10.0
    expected[1, 2] = 5.0
    assert np.allclose(h, expected, atol=1e-9)


def test_random_quad_to_canonical_reprojection():
    rng = np.random.default_rng(7)
    for _ in range(50):
        src = _random_valid_quad(rng)
        h = homography_from_points(src, CANONICAL)
        mapped = apply_homography(h, src.corners)
        assert np.abs(mapped - CANONICAL.corners).max() < 1e-9


def test_collinear_corners_rejected():
    flat = Quad(np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0], [0.0, 10.0]]))
    with pytest.raises(DegenerateConfiguration):
        homography_from_points(flat, UNIT)
    with pytest.raises(DegenerateConfiguration):
        homography_from_points(UNIT, flat)


def test_apply_identity():
    assert np.allclose(apply_homography(np.eye(3), (3.0, 4.0)), (3.0, 4.0))


def test_apply_pure_scale():
    h = np.diag([2.0, 2.0, 1.0])
    assert np.allclose(apply_homography(h, (3.0, 4.0)), (6.0, 8.0))


def test_apply_maps_src_corners_to_dst():
    rng = np.random.default_rng(11)
    src = _random_valid_quad(rng)
    dst = _random_valid_quad(rng)
    h = homography_from_points(src, dst)
    assert np.abs(apply_homography(h, src.corners) - dst.corners).max() < 1e-9


def test_apply_point_at_infinity():
    h = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 3.0]])
    with pytest.raises(PointAtInfinity):
        apply_homography(h, (3.0, 1.0))


def test_invert_identity_and_scale():
    assert np.allclose(invert_homography(np.eye(3)), np.eye(3))
    assert np.allclose(invert_homography(np.diag([2.0, 2.0, 1.0])),
                       np.diag([0.5, 0.5, 1.0]))


def test_invert_singular():
    with pytest.raises(SingularMatrix):
        invert_homography(np.diag([1.0, 0.0, 1.0]))


def test_invert_round_trip_random_points():
    rng = np.random.default_rng(13)
    src = _random_valid_quad(rng)
    dst = _random_valid_quad(rng)
    h = homography_from_points(src, dst)
    hinv = invert_homography(h)
    pts = rng.uniform(0, 640, size=(100, 2))
    back = apply_homography(hinv, apply_homography(h, pts))
    assert np.abs(back - pts).max() < 1e-9


def test_compose_round_trip():
    rng = np.random.default_rng(17)
    for _ in range(20):
        a = _random_valid_quad(rng)
        b = _random_valid_quad(rng)
        fwd = homography_from_points(a, b)
        rev = homography_from_points(b, a)
        back = apply_homography(rev, apply_homography(fwd, a.corners))
        assert np.abs(back - a.corners).max() < 1e-6


def test_scaling_invariance():
    rng = np.random.default_rng(19)
    src = _random_valid_quad(rng)
    dst = _random_valid_quad(rng)
    pts = rng.uniform(0, 640, size=(20, 2))
    mapped = apply_homography(homography_from_points(src, dst), pts)
    k = 7.5
    src_k = Quad(src.corners * k)
    dst_k = Quad(dst.corners * k)
    mapped_k = apply_homography(homography_from_points(src_k, dst_k), pts * k)
    assert np.abs(mapped_k / k - mapped).max() < 1e-6


def test_quad_validity():
    assert CANONICAL.signed_area() == pytest.approx(639.0 * 479.0)
    assert CANONICAL.is_valid()
    # Swapping BR and BL self-intersects the boundary.
    twisted = Quad(CANONICAL.corners[[0, 1, 3, 2]])
    assert not twisted.is_valid()
    small = Quad.from_rect(0.0, 0.0, 10.0, 10.0)
    assert not small.is_valid(min_area=1024.0)
    assert small.is_valid(min_area=100.0)


def test_quad_shape_checks():
    with pytest.raises(ValueError):
        Quad(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        Quad(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, np.nan], [0.0, 1.0]]))


def test_quad_json_round_trip():
    rng = np.random.default_rng(23)
    q = _random_valid_quad(rng)
    parsed = json.loads(q.to_json())
    assert len(parsed) == 4 and all(len(p) == 2 for p in parsed)
    assert np.array_equal(Quad.from_json(q.to_json()).corners, q.corners)


def test_random_quad_deterministic():
    a = random_quad(42, 640, 480)
    b = random_quad(42, 640, 480)
    assert np.array_equal(a.corners, b.corners)


def test_random_quad_properties_bulk():
    cfg = QuadGenConfig()
    for seed in range(10_000):
        q = random_quad(seed, 640, 480, cfg)
        c = q.corners
        assert c[:, 0].min() >= cfg.margin_px
        assert c[:, 0].max() <= 639.0 - cfg.margin_px
        assert c[:, 1].min() >= cfg.margin_px
        assert c[:, 1].max() <= 479.0 - cfg.margin_px
        assert np.all(q.edge_crosses() > 0)
        assert q.signed_area() >= cfg.min_area_px2


def test_draw_displacements_bounded():
    rng = np.random.default_rng(29)
    cfg = QuadGenConfig()
    for _ in range(5000):
        draw = _draw_quad(rng, 640, 480, cfg)
        if draw is None:
            continue
        assert np.all(np.abs(draw.displacements[:, 0]) <= draw.base_w / 2.0)
        assert np.all(np.abs(draw.displacements[:, 1]) <= draw.base_h / 2.0)


def test_random_quad_exhaustion():
    cfg = QuadGenConfig(min_area_px2=1e9)
    with pytest.raises(GenerationExhausted):
        random_quad(0, 64, 64, cfg)


def test_gen_config_validation():
    with pytest.raises(ValueError):
        QuadGenConfig(base_w_frac=(0.0, 0.5))
    with pytest.raises(ValueError):
        QuadGenConfig(base_h_frac=(0.9, 0.6))
    with pytest.raises(ValueError):
        QuadGenConfig(margin_px=-1.0)
    with pytest.raises(ValueError):
        QuadGenConfig(min_corner_scale=-0.1)


def test_min_corner_scale_closed_forms():
    assert min_corner_scale(Quad.from_rect(5.0, 5.0, 105.0, 105.0)) == pytest.approx(1.0)
    # w x h rectangle: sigma_min = h, area = w*h, so the scale is sqrt(h/w).
    rect = Quad.from_rect(0.0, 0.0, 200.0, 100.0)
    assert min_corner_scale(rect) == pytest.approx(np.sqrt(0.5))


def test_min_corner_scale_gate():
    cfg = QuadGenConfig(min_corner_scale=0.3)
    for seed in range(200):
        q = random_quad(seed, 640, 480, cfg)
        assert min_corner_scale(q) >= 0.3


def test_quad_contains_matches_shapely():
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import Point, Polygon

    rng = np.random.default_rng(31)
    for _ in range(10):
        q = _random_valid_quad(rng)
        poly = Polygon(q.corners)
        pts = rng.uniform(0, 640, size=(200, 2))
        mine = quad_contains(q, pts[:, 0], pts[:, 1])
        theirs = np.array([poly.covers(Point(x, y)) for x, y in pts])
        assert np.array_equal(mine, theirs)
