"""Image buffers and resampling.

Working representation is a float64 numpy array with intensities in [0, 1],
shaped (H, W) for grayscale or (H, W, 3) for RGB. Storage representation is
unsigned 8-bit PNG (16-bit for heatmaps). Pixel (row i, col j) has its center
at continuous coordinates (x=j, y=i), origin top-left, y growing downward.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeMismatch

# Rec. 601 luma weights for RGB -> grayscale.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_float(img: np.ndarray) -> np.ndarray:
    """Convert a storage-representation image to float64 in [0, 1]."""
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float64) / 255.0
    if img.dtype == np.uint16:
        return img.astype(np.float64) / 65535.0
    return img.astype(np.float64)


def to_u8(img: np.ndarray) -> np.ndarray:
    """Quantize a float image in [0, 1] to unsigned 8-bit: u8 = round(255 * v)."""
    img = np.asarray(img, dtype=np.float64)
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def luma(img: np.ndarray) -> np.ndarray:
    """Collapse RGB to grayscale with 0.299/0.587/0.114 weights; pass grayscale through."""
    img = np.asarray(img)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ LUMA_WEIGHTS
    raise ShapeMismatch(f"expected (H, W) or (H, W, 3), got {img.shape}")


def match_channels(img: np.ndarray, channels: int) -> np.ndarray:
    """Coerce an image to the requested channel count (1 or 3)."""
    if channels == 1:
        return luma(img)
    if img.ndim == 2:
        return np.repeat(img[:, :, None], 3, axis=2)
    return img


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")


def load_image(path: str | Path) -> np.ndarray:
    """Read a PNG/JPEG into the float working representation."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "I;16"):
            im = im.convert("RGB")
        arr = np.asarray(im)
    return to_float(arr)


def save_png(path: str | Path, img: np.ndarray) -> None:
    """Write an image as 8-bit PNG (grayscale or RGB). Floats are quantized."""
    img = np.asarray(img)
    if img.dtype != np.uint8:
        img = to_u8(img)
    Image.fromarray(img).save(path, format="PNG")


def save_heatmap_png(path: str | Path, values: np.ndarray) -> None:
    """Write a non-negative heatmap as 16-bit grayscale PNG, scaled so max -> 65535."""
    values = np.asarray(values, dtype=np.float64)
    peak = values.max()
    if peak <= 0:
        q = np.zeros(values.shape, dtype=np.uint16)
    else:
        q = np.rint(values * (65535.0 / peak)).astype(np.uint16)
    Image.fromarray(q).save(path, format="PNG")


def load_heatmap_png(path: str | Path) -> np.ndarray:
    """Read a 16-bit grayscale heatmap PNG into float64 values in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    return to_float(arr)


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample an image at continuous coordinates with bilinear interpolation.

    Coordinates are clamped to the pixel-center span [0, W-1] x [0, H-1];
    callers decide separately what counts as out of bounds.
    """
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def bilinear_resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize with bilinear interpolation under the pixel-center convention.

    Identity when the output size equals the input size.
    """
    h, w = img.shape[:2]
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return bilinear_sample(img, gx, gy)
