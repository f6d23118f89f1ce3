"""Reflection synthesis and perspective insertion of screens into scenes.

All images are float working buffers in [0, 1], grayscale (H, W) or RGB
(H, W, 3). Outputs are freshly allocated; inputs are never mutated.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateConfiguration, ImageTooSmall, QuadOutOfBounds, ShapeMismatch
from .geometry import Quad, apply_homography, homography_from_points, quad_contains
from .images import bilinear_resize, bilinear_sample, check_same_shape, match_channels

MIN_REFLECTION_SOURCE = 8


def screen_blend(screen: np.ndarray, reflection: np.ndarray, alpha: float) -> np.ndarray:
    """Blend a reflection onto a screen image.

    The screen-blend intermediate is Y = 1 - (1 - S)(1 - R) and the output is
    B = alpha * S + (1 - alpha) * Y, clamped to [0, 1]. Evaluated as
    S + (1 - alpha) * R * (1 - S) so that alpha = 1 or R = 0 return S exactly
    and the result never falls below S.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    s = np.asarray(screen, dtype=np.float64)
    r = np.asarray(reflection, dtype=np.float64)
    check_same_shape(s, r)
    y = s + r * (1.0 - s)
    b = s + (1.0 - alpha) * (y - s)
    return np.clip(b, 0.0, 1.0)


def crop_reflection(bg: np.ndarray, target_w: int, target_h: int, seed: int) -> np.ndarray:
    """Deterministic random crop of a background, rescaled to the target size.

    The crop window is the largest sub-rectangle with the target aspect ratio,
    placed uniformly at random; a source whose dimensions already equal the
    target is returned unchanged.
    """
    bg = np.asarray(bg, dtype=np.float64)
    h, w = bg.shape[:2]
    if h < MIN_REFLECTION_SOURCE or w < MIN_REFLECTION_SOURCE:
        raise ImageTooSmall(f"reflection source {w}x{h} is smaller than "
                            f"{MIN_REFLECTION_SOURCE}x{MIN_REFLECTION_SOURCE}")
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be positive")
    if w * target_h >= h * target_w:
        win_h = h
        win_w = max(1, min(w, round(h * target_w / target_h)))
    else:
        win_w = w
        win_h = max(1, min(h, round(w * target_h / target_w)))
    rng = np.random.default_rng(seed)
    x0 = int(rng.integers(0, w - win_w + 1))
    y0 = int(rng.integers(0, h - win_h + 1))
    crop = bg[y0:y0 + win_h, x0:x0 + win_w]
    return bilinear_resize(crop, target_w, target_h)


def insert_screen(bg: np.ndarray, screen: np.ndarray, quad: Quad) -> tuple[np.ndarray, np.ndarray]:
    """Warp a screen image into a quadrilateral region of a background scene.

    Every background pixel whose center lies inside the quad is replaced by
    the bilinear sample of the screen under the homography mapping the quad
    onto the screen's full pixel-center rectangle. Returns the composited
    scene and a binary mask (1 where the screen was written). Pixels outside
    the quad are bit-identical to the background.
    """
    bg = np.asarray(bg, dtype=np.float64)
    screen = np.asarray(screen, dtype=np.float64)
    bg_h, bg_w = bg.shape[:2]
    c = quad.corners
    if (c[:, 0].min() < 0 or c[:, 0].max() > bg_w - 1
            or c[:, 1].min() < 0 or c[:, 1].max() > bg_h - 1):
        raise QuadOutOfBounds(f"quad corners leave the {bg_w}x{bg_h} background")
    if not np.all(quad.edge_crosses() > 0.0):
        raise DegenerateConfiguration("quad is not convex with positive orientation")

    if bg.ndim == 3:
        screen = match_channels(screen, 3)
    sh, sw = screen.shape[:2]
    target = Quad.from_rect(0.0, 0.0, sw - 1.0, sh - 1.0)
    h = homography_from_points(quad, target)

    # Only pixel centers inside the quad's bounding box can be covered.
    x_lo = int(np.floor(c[:, 0].min()))
    x_hi = int(np.ceil(c[:, 0].max()))
    y_lo = int(np.floor(c[:, 1].min()))
    y_hi = int(np.ceil(c[:, 1].max()))
    xs = np.arange(x_lo, x_hi + 1)
    ys = np.arange(y_lo, y_hi + 1)
    gx, gy = np.meshgrid(xs.astype(np.float64), ys.astype(np.float64))
    inside = quad_contains(quad, gx, gy)

    out = bg.copy()
    mask = np.zeros((bg_h, bg_w), dtype=np.float64)
    if inside.any():
        pts = np.column_stack([gx[inside], gy[inside]])
        src = apply_homography(h, pts)
        samples = bilinear_sample(screen, src[:, 0], src[:, 1])
        rows = gy[inside].astype(np.intp)
        cols = gx[inside].astype(np.intp)
        out[rows, cols] = samples
        mask[rows, cols] = 1.0
    return out, mask
