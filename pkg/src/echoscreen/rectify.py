"""Screen extraction to a canonical grid and intensity normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Quad, apply_homography, homography_from_points
from .images import bilinear_sample, luma, to_float

MIN_TARGET_DIM = 16


@dataclass(frozen=True)
class RectifyConfig:
    """Canonical output grid (640x480 by default) and out-of-source fill level."""

    target_w: int = 640
    target_h: int = 480
    fill: float = 0.0

    def __post_init__(self):
        if self.target_w < MIN_TARGET_DIM or self.target_h < MIN_TARGET_DIM:
            raise ValueError(f"target dims must be >= {MIN_TARGET_DIM}")


def canonical_quad(w: int, h: int) -> Quad:
    """Pixel-center rectangle of a w x h grid: TL (0,0) through BL (0,h-1)."""
    return Quad.from_rect(0.0, 0.0, w - 1.0, h - 1.0)


def rectify(photo: np.ndarray, quad: Quad, cfg: RectifyConfig = RectifyConfig()) -> np.ndarray:
    """Resample the quad region of a photo onto the canonical target grid.

    Each target pixel center is mapped through the homography sending the
    canonical rectangle onto the quad and bilinearly sampled from the photo;
    samples landing outside the photo's pixel-center span use cfg.fill. Output
    dimensions are exactly (target_h, target_w), channels follow the photo.
    """
    photo = to_float(photo)
    ph, pw = photo.shape[:2]
    h = homography_from_points(canonical_quad(cfg.target_w, cfg.target_h), quad)
    gx, gy = np.meshgrid(
        np.arange(cfg.target_w, dtype=np.float64),
        np.arange(cfg.target_h, dtype=np.float64),
    )
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    src = apply_homography(h, pts)
    sx = src[:, 0].reshape(cfg.target_h, cfg.target_w)
    sy = src[:, 1].reshape(cfg.target_h, cfg.target_w)
    inside = (sx >= 0.0) & (sx <= pw - 1.0) & (sy >= 0.0) & (sy <= ph - 1.0)
    out = bilinear_sample(photo, sx, sy)
    out[~inside] = cfg.fill
    return out


def normalize(img: np.ndarray) -> np.ndarray:
    """Background-subtracting contrast stretch to 8-bit grayscale.

    Converts to grayscale, quantizes to 256 levels, takes the most common
    level as background (ties to the lowest), maps it and everything below to
    0, and stretches linearly so the maximum reaches 255. A uniform image
    comes back all zero. Idempotent bit-exactly.
    """
    v = luma(to_float(img))
    q = np.rint(np.clip(v, 0.0, 1.0) * 255.0).astype(np.int64)
    counts = np.bincount(q.ravel(), minlength=256)
    b = int(np.argmax(counts))
    top = int(q.max())
    if top <= b:
        return np.zeros(q.shape, dtype=np.uint8)
    out = np.zeros(q.shape, dtype=np.uint8)
    above = q > b
    out[above] = np.rint(255.0 * (q[above] - b) / (top - b)).astype(np.uint8)
    return out
