"""Planar geometry: quadrilaterals, homographies and random screen placement.

Corner order is fixed as TL, TR, BR, BL, which is clockwise on screen
(y grows downward). Homographies are plain 3x3 float64 arrays normalized so
that m[2][2] == 1 whenever |m[2][2]| exceeds the degeneracy tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateConfiguration,
    GenerationExhausted,
    PointAtInfinity,
    SingularMatrix,
)

COLLINEARITY_TOL = 1e-9
PROJECTIVE_TOL = 1e-12
DEFAULT_MIN_AREA = 1024.0
MAX_QUAD_RETRIES = 1000


@dataclass(frozen=True)
class Quad:
    """Four ordered corner points (TL, TR, BR, BL) in pixel coordinates."""

    corners: np.ndarray  # (4, 2) float64

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64)
        if c.shape != (4, 2):
            raise ValueError(f"corners must be (4, 2), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("corners must be finite")
        object.__setattr__(self, "corners", c)

    @classmethod
    def from_rect(cls, x0: float, y0: float, x1: float, y1: float) -> "Quad":
        """Axis-aligned rectangle with TL at (x0, y0) and BR at (x1, y1)."""
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64))

    def signed_area(self) -> float:
        """Shoelace area; positive for TL,TR,BR,BL order with y pointing down."""
        x = self.corners[:, 0]
        y = self.corners[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def edge_crosses(self) -> np.ndarray:
        """Cross products of consecutive edges; all positive for a valid quad."""
        e = np.roll(self.corners, -1, axis=0) - self.corners
        nxt = np.roll(e, -1, axis=0)
        return e[:, 0] * nxt[:, 1] - e[:, 1] * nxt[:, 0]

    def is_valid(self, min_area: float = DEFAULT_MIN_AREA) -> bool:
        """Convex, positively oriented, corners distinct, area at least min_area."""
        return bool(np.all(self.edge_crosses() > 0.0)) and self.signed_area() >= min_area

    def to_json(self) -> str:
        return json.dumps([[float(x), float(y)] for x, y in self.corners])

    @classmethod
    def from_json(cls, text: str) -> "Quad":
        return cls.from_list(json.loads(text))

    def to_list(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.corners]

    @classmethod
    def from_list(cls, pts) -> "Quad":
        return cls(np.asarray(pts, dtype=np.float64))


@dataclass(frozen=True)
class QuadGenConfig:
    """Random screen placement parameters.

    base_w_frac: base rectangle width range as a fraction of background width.
    base_h_frac: base rectangle height range as a fraction of base width
        (screen-like aspect).
    margin_px: minimum distance of generated corners from the image border.
    min_area_px2: minimum accepted quad area in square pixels.
    min_corner_scale: minimum accepted min_corner_scale(quad); 0 disables the
        check. Rejects quads so oblique that rectifying them back would
        upsample some corner region beyond recognition.
    """

    base_w_frac: tuple[float, float] = (0.25, 0.70)
    base_h_frac: tuple[float, float] = (0.60, 0.90)
    margin_px: float = 2.0
    min_area_px2: float = DEFAULT_MIN_AREA
    min_corner_scale: float = 0.0

    def __post_init__(self):
        for name in ("base_w_frac", "base_h_frac"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo <= hi < 1.0):
                raise ValueError(f"{name} must satisfy 0 < lo <= hi < 1, got ({lo}, {hi})")
        if self.margin_px < 0:
            raise ValueError("margin_px must be >= 0")
        if self.min_corner_scale < 0:
            raise ValueError("min_corner_scale must be >= 0")


def _check_noncollinear(corners: np.ndarray, label: str) -> None:
    # |cross| below tolerance means the triangle spanned by 3 corners is flat.
    for i in range(4):
        a, b, c = np.delete(corners, i, axis=0)
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) <= COLLINEARITY_TOL:
            raise DegenerateConfiguration(f"3 {label} corners are collinear")


def _hartley_transform(pts: np.ndarray) -> np.ndarray:
    """Similarity transform moving the centroid to the origin and the mean
    distance from it to sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = float(np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean())
    if mean_dist <= PROJECTIVE_TOL:
        raise DegenerateConfiguration("corners are coincident")
    s = np.sqrt(2.0) / mean_dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def _normalize_homography(h: np.ndarray) -> np.ndarray:
    if abs(h[2, 2]) > PROJECTIVE_TOL:
        h = h / h[2, 2]
    return h


def homography_from_points(src: Quad, dst: Quad) -> np.ndarray:
    """Solve the 4-point direct linear transform mapping src corners onto dst.

    Both corner sets are Hartley-normalized (centroid to origin, mean distance
    sqrt(2)) before the 8x8 linear system is solved, then the result is
    denormalized and scaled so m[2][2] == 1.

    Raises DegenerateConfiguration when any three corners of either quad are
    collinear within tolerance.
    """
    _check_noncollinear(src.corners, "source")
    _check_noncollinear(dst.corners, "destination")
    t_src = _hartley_transform(src.corners)
    t_dst = _hartley_transform(dst.corners)
    sn = _transform_points(t_src, src.corners)
    dn = _transform_points(t_dst, dst.corners)

    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i in range(4):
        x, y = sn[i]
        u, v = dn[i]
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]
        b[2 * i] = u
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]
        b[2 * i + 1] = v
    try:
        h8 = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfiguration("corner correspondence admits no homography") from exc
    hn = np.append(h8, 1.0).reshape(3, 3)
    h = np.linalg.inv(t_dst) @ hn @ t_src
    return _normalize_homography(h)


def _transform_points(t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    homog = np.hstack([pts, np.ones((len(pts), 1))]) @ t.T
    return homog[:, :2] / homog[:, 2:3]


def apply_homography(h: np.ndarray, pts) -> np.ndarray:
    """Map points (..., 2) through a homography.

    Raises PointAtInfinity when the projective denominator of any point falls
    below tolerance.
    """
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    w = p[..., 0] * h[2, 0] + p[..., 1] * h[2, 1] + h[2, 2]
    if np.any(np.abs(w) <= PROJECTIVE_TOL):
        raise PointAtInfinity("projective denominator vanished")
    x = (p[..., 0] * h[0, 0] + p[..., 1] * h[0, 1] + h[0, 2]) / w
    y = (p[..., 0] * h[1, 0] + p[..., 1] * h[1, 1] + h[1, 2]) / w
    out = np.stack([x, y], axis=-1)
    return out[0] if single else out


def invert_homography(h: np.ndarray) -> np.ndarray:
    """Invert a homography; raises SingularMatrix for |det| at or below tolerance."""
    h = _normalize_homography(np.asarray(h, dtype=np.float64))
    if abs(np.linalg.det(h)) <= PROJECTIVE_TOL:
        raise SingularMatrix("homography is not invertible")
    return _normalize_homography(np.linalg.inv(h))


def min_corner_scale(quad: Quad) -> float:
    """Smallest local linear scale of the unit-square-to-quad warp, relative
    to the quad's overall size.

    Evaluates the Jacobian of the homography at the four corners, takes its
    smallest singular value, and divides by sqrt(area). 1 for a square,
    sqrt(h/w) for a w x h rectangle, and near 0 for quads with strong
    perspective collapse at some corner.
    """
    h = homography_from_points(Quad.from_rect(0.0, 0.0, 1.0, 1.0), quad)
    smallest = np.inf
    for u, v in ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)):
        d = h[2, 0] * u + h[2, 1] * v + h[2, 2]
        nx = h[0, 0] * u + h[0, 1] * v + h[0, 2]
        ny = h[1, 0] * u + h[1, 1] * v + h[1, 2]
        jac = np.array([
            [h[0, 0] / d - nx * h[2, 0] / d**2, h[0, 1] / d - nx * h[2, 1] / d**2],
            [h[1, 0] / d - ny * h[2, 0] / d**2, h[1, 1] / d - ny * h[2, 1] / d**2],
        ])
        smallest = min(smallest, np.linalg.svd(jac, compute_uv=False)[-1])
    return float(smallest / np.sqrt(quad.signed_area()))


class _QuadDraw(NamedTuple):
    corners: np.ndarray
    base_w: float
    base_h: float
    displacements: np.ndarray  # (4, 2)


def _draw_quad(rng: np.random.Generator, bg_w: int, bg_h: int, cfg: QuadGenConfig) -> _QuadDraw | None:
    """One placement attempt: an axis-aligned base rectangle placed uniformly
    inside the margin-inset background, each corner displaced independently by
    up to half the base dimensions."""
    w = bg_w * rng.uniform(*cfg.base_w_frac)
    h = w * rng.uniform(*cfg.base_h_frac)
    lo_x, hi_x = cfg.margin_px, (bg_w - 1) - cfg.margin_px - w
    lo_y, hi_y = cfg.margin_px, (bg_h - 1) - cfg.margin_px - h
    if hi_x < lo_x or hi_y < lo_y:
        return None
    x0 = rng.uniform(lo_x, hi_x)
    y0 = rng.uniform(lo_y, hi_y)
    rect = np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]])
    disp = np.column_stack(
        [rng.uniform(-w / 2.0, w / 2.0, size=4), rng.uniform(-h / 2.0, h / 2.0, size=4)]
    )
    return _QuadDraw(rect + disp, w, h, disp)


def random_quad(seed: int, bg_w: int, bg_h: int, cfg: QuadGenConfig = QuadGenConfig()) -> Quad:
    """Deterministically generate a valid random screen quad for a background.

    Resamples (up to MAX_QUAD_RETRIES) until the quad is convex, meets the
    configured minimum area, and keeps every corner on the pixel-center grid
    inset by margin_px. Raises GenerationExhausted when the retry budget runs
    out.
    """
    rng = np.random.default_rng(seed)
    lo = cfg.margin_px
    hi_x = (bg_w - 1) - cfg.margin_px
    hi_y = (bg_h - 1) - cfg.margin_px
    for _ in range(MAX_QUAD_RETRIES):
        draw = _draw_quad(rng, bg_w, bg_h, cfg)
        if draw is None:
            continue
        c = draw.corners
        if not (
            np.all(c[:, 0] >= lo)
            and np.all(c[:, 0] <= hi_x)
            and np.all(c[:, 1] >= lo)
            and np.all(c[:, 1] <= hi_y)
        ):
            continue
        quad = Quad(c)
        if not quad.is_valid(min_area=cfg.min_area_px2):
            continue
        if cfg.min_corner_scale > 0 and min_corner_scale(quad) < cfg.min_corner_scale:
            continue
        return quad
    raise GenerationExhausted(
        f"no valid quad for {bg_w}x{bg_h} background after {MAX_QUAD_RETRIES} attempts"
    )


def quad_contains(quad: Quad, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Boolean mask of points inside (or on the boundary of) a convex quad."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = np.ones(np.broadcast(x, y).shape, dtype=bool)
    corners = quad.corners
    for i in range(4):
        ax, ay = corners[i]
        bx, by = corners[(i + 1) % 4]
        # Positive orientation: interior lies on the positive-cross side of each edge.
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        inside &= cross >= 0.0
    return inside
