"""Verifiable interfaces of the corner detection model.

Covers Gaussian target heatmaps, DSNT coordinate decoding, the two task
losses with their uncertainty-weighted combination, and ingestion of external
model predictions. Network architecture and training are out of scope; this
module only pins down the math those components must agree on.

Normalized coordinates live in [-1, 1] with pixel index j of a W-wide axis at
x = (2j + 1 - W) / W, so the image center is (0, 0) exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CornerOutOfBounds,
    EmptyHeatmap,
    InvariantViolation,
    NonPositiveSigma,
    ParseError,
)
from .geometry import Quad
from .images import load_heatmap_png

HEATMAP_SUM_TOL = 1e-12
PROB_EPS = 1e-7


def coordinate_grid(n: int) -> np.ndarray:
    """Normalized center coordinates of n pixels along one axis."""
    return (2.0 * np.arange(n) + 1.0 - n) / n


def render_target_heatmaps(quad: Quad, w: int, h: int, sigma_px: float) -> np.ndarray:
    """Training-target heatmaps, one unnormalized Gaussian per corner.

    Returns a (4, h, w) array; channel i peaks at 1 at the pixel center
    nearest corner i. Raises CornerOutOfBounds for corners outside
    [0, w) x [0, h).
    """
    if sigma_px <= 0:
        raise ValueError("sigma_px must be positive")
    c = quad.corners
    if np.any(c[:, 0] < 0) or np.any(c[:, 0] >= w) or np.any(c[:, 1] < 0) or np.any(c[:, 1] >= h):
        raise CornerOutOfBounds(f"corners must lie in [0, {w}) x [0, {h})")
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    out = np.empty((4, h, w), dtype=np.float64)
    for i, (cx, cy) in enumerate(c):
        d2 = (xs[None, :] - cx) ** 2 + (ys[:, None] - cy) ** 2
        g = np.exp(-d2 / (2.0 * sigma_px**2))
        out[i] = g / g.max()
    return out


def dsnt_decode(hm: np.ndarray) -> tuple[float, float]:
    """Soft-argmax of a heatmap as a normalized (x, y) coordinate.

    The heatmap is normalized to unit mass and reduced against the coordinate
    grid; invariant to positive rescaling of the input.
    """
    hm = np.asarray(hm, dtype=np.float64)
    total = hm.sum()
    if total <= HEATMAP_SUM_TOL:
        raise EmptyHeatmap("heatmap mass is zero")
    z = hm / total
    h, w = hm.shape
    x = float(z.sum(axis=0) @ coordinate_grid(w))
    y = float(z.sum(axis=1) @ coordinate_grid(h))
    return x, y


def denormalize(coord: tuple[float, float], w: int, h: int) -> tuple[float, float]:
    """Map a normalized coordinate back to pixel indices: j = (x*W - 1 + W) / 2."""
    x, y = coord
    return (x * w - 1.0 + w) / 2.0, (y * h - 1.0 + h) / 2.0


def decode_corners(heatmaps: np.ndarray) -> np.ndarray:
    """DSNT-decode a (4, h, w) heatmap stack into pixel-frame corners."""
    heatmaps = np.asarray(heatmaps, dtype=np.float64)
    h, w = heatmaps.shape[1:]
    return np.array([denormalize(dsnt_decode(hm), w, h) for hm in heatmaps])


def localization_loss(pred: Quad, ref: Quad) -> float:
    """Mean Euclidean distance over the 4 order-matched corners, in pixels."""
    d = np.sqrt(((pred.corners - ref.corners) ** 2).sum(axis=1))
    return float(d.mean())


def classification_loss(screen_prob: float, label: int) -> float:
    """Binary cross entropy with the probability clamped to [eps, 1 - eps]."""
    p = min(max(float(screen_prob), PROB_EPS), 1.0 - PROB_EPS)
    y = float(label)
    return -(y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


def _check_sigmas(sigma_s: float, sigma_c: float) -> None:
    if sigma_s <= 0 or sigma_c <= 0:
        raise NonPositiveSigma(f"sigmas must be positive, got ({sigma_s}, {sigma_c})")


def multitask_loss(loc_loss: float, cls_loss: float, sigma_s: float, sigma_c: float) -> float:
    """Uncertainty-weighted combination of the two task losses.

    L = L_s / sigma_s^2 + L_c / sigma_c^2 + ln(sigma_s + 1) + ln(sigma_c + 1).
    """
    _check_sigmas(sigma_s, sigma_c)
    return (loc_loss / sigma_s**2 + cls_loss / sigma_c**2
            + math.log(sigma_s + 1.0) + math.log(sigma_c + 1.0))


def multitask_loss_grad_sigma(loc_loss: float, cls_loss: float,
                              sigma_s: float, sigma_c: float) -> tuple[float, float]:
    """Analytic partial derivatives of multitask_loss w.r.t. the two sigmas."""
    _check_sigmas(sigma_s, sigma_c)
    ds = -2.0 * loc_loss / sigma_s**3 + 1.0 / (sigma_s + 1.0)
    dc = -2.0 * cls_loss / sigma_c**3 + 1.0 / (sigma_c + 1.0)
    return ds, dc


@dataclass
class PredictionRecord:
    """One external model prediction keyed by sample id.

    corners_px is a (4, 2) float array in TL, TR, BR, BL order, or None when
    the model reported no corners and no heatmaps. Corner values are kept as
    reported (finite, but not required to form a valid screen quad).
    """

    id: str
    screen_prob: float
    corners_px: np.ndarray | None = None
    heatmap_paths: list[str] | None = None
    corners_from_heatmaps: bool = False

    def __post_init__(self):
        if not 0.0 <= self.screen_prob <= 1.0:
            raise InvariantViolation(
                f"screen_prob must be in [0, 1], got {self.screen_prob} (id={self.id})"
            )
        if self.corners_px is not None:
            c = np.asarray(self.corners_px, dtype=np.float64)
            if c.shape != (4, 2) or not np.all(np.isfinite(c)):
                raise InvariantViolation(f"corners must be a finite 4x2 array (id={self.id})")
            self.corners_px = c


def ingest_predictions(path: str | Path) -> list[PredictionRecord]:
    """Read a predictions JSONL file into validated records.

    Fields per line: {id, screen_prob, corners?: [[x,y] x4], heatmaps?: [path x4]}.
    Heatmap paths are resolved relative to the file. When a record carries
    heatmaps but no corners, corners are filled by DSNT decoding.
    """
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            records.append(_parse_prediction(obj, path, lineno))
    return records


def _parse_prediction(obj: dict, path: Path, lineno: int) -> PredictionRecord:
    for field in ("id", "screen_prob"):
        if field not in obj:
            raise ParseError(f"{path}:{lineno}: missing field {field!r}")
    corners = obj.get("corners")
    heatmaps = obj.get("heatmaps")
    from_heatmaps = False
    if corners is None and heatmaps is not None:
        if len(heatmaps) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 heatmap paths")
        stack = np.stack([load_heatmap_png(path.parent / p) for p in heatmaps])
        corners = decode_corners(stack)
        from_heatmaps = True
    try:
        return PredictionRecord(
            id=str(obj["id"]),
            screen_prob=float(obj["screen_prob"]),
            corners_px=None if corners is None else np.asarray(corners, dtype=np.float64),
            heatmap_paths=None if heatmaps is None else [str(p) for p in heatmaps],
            corners_from_heatmaps=from_heatmaps,
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from exc
