"""Shared fixture imagery: procedural echo-like frames and indoor-like
backgrounds, plus index-file writers for dataset builds."""

import json
from pathlib import Path

import numpy as np
import pytest

from echoscreen.images import bilinear_resize, save_png


def _smooth_noise(rng, w, h, cells_x=16, cells_y=12):
    """Band-limited random field in [0, 1]: coarse grid upsampled bilinearly."""
    coarse = rng.random((cells_y, cells_x))
    return bilinear_resize(coarse, w, h)


def echo_frame(seed, w=640, h=480):
    """Synthetic ultrasound-like frame: dark surround, bright sector fan with
    smooth speckle-ish texture, arcs and a few UI bars. Grayscale float."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w), 0.02)

    apex_x, apex_y = w / 2.0, 0.06 * h
    dx = x - apex_x
    dy = y - apex_y
    r = np.hypot(dx, dy)
    ang = np.arctan2(dx, dy)  # 0 points straight down
    half_angle = np.deg2rad(rng.uniform(32.0, 42.0))
    radius = rng.uniform(0.78, 0.92) * h
    sector = (np.abs(ang) <= half_angle) & (r <= radius) & (r >= 0.04 * h)

    texture = 0.18 + 0.5 * _smooth_noise(rng, w, h)
    texture *= 1.0 - 0.5 * (r / radius) ** 2
    # A few bright curved bands, echo-structure stand-ins.
    for _ in range(3):
        r0 = rng.uniform(0.25, 0.85) * radius
        width = rng.uniform(0.02, 0.05) * radius
        band = np.exp(-((r - r0) ** 2) / (2.0 * width**2))
        texture += 0.25 * band * rng.uniform(0.5, 1.0)
    img[sector] = np.clip(texture[sector], 0.0, 1.0)

    img[: int(0.04 * h), :] = 0.0
    for i in range(4):
        x0 = int(w * (0.05 + 0.1 * i))
        img[int(0.012 * h):int(0.03 * h), x0:x0 + int(0.06 * w)] = 0.85
    bar_x = int(0.95 * w)
    img[int(0.2 * h):int(0.8 * h), bar_x:bar_x + int(0.02 * w)] = np.linspace(
        0.1, 0.95, int(0.8 * h) - int(0.2 * h)
    )[:, None]
    return np.clip(img, 0.0, 1.0)


def background(seed, w=640, h=480):
    """Indoor-like RGB scene: colored gradient wall, rectangles, soft shading."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.25, 0.6, size=3)
    tilt = rng.uniform(-0.15, 0.15, size=3)
    yy = np.linspace(0.0, 1.0, h)[:, None, None]
    img = np.clip(base[None, None, :] + tilt[None, None, :] * yy, 0.05, 0.9)
    img = np.broadcast_to(img, (h, w, 3)).copy()
    for _ in range(rng.integers(2, 5)):
        rw = int(rng.uniform(0.1, 0.4) * w)
        rh = int(rng.uniform(0.1, 0.5) * h)
        x0 = int(rng.uniform(0, w - rw))
        y0 = int(rng.uniform(0, h - rh))
        color = rng.uniform(0.1, 0.8, size=3)
        img[y0:y0 + rh, x0:x0 + rw] = color
    shade = 0.75 + 0.25 * _smooth_noise(rng, w, h, cells_x=6, cells_y=4)
    return np.clip(img * shade[:, :, None], 0.0, 1.0)


def write_echo_corpus(root: Path, n_patients=4, frames_per_patient=3, w=640, h=480,
                      with_splits=False):
    """Write echo PNGs and their patient-tagged JSONL index; returns the index path.

    Frames are interleaved across patients so a prefix of the index still
    touches every patient.
    """
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for frame in range(frames_per_patient):
        for patient in range(n_patients):
            name = f"echo_p{patient:02d}_f{frame:02d}.png"
            save_png(root / name, echo_frame(seed=1000 * patient + frame, w=w, h=h))
            entry = {"path": name, "patient_id": f"patient{patient:02d}"}
            if with_splits:
                entry["split"] = ("train", "val", "test")[patient % 3]
            entries.append(entry)
    index = root / "echo_index.jsonl"
    with open(index, "w") as f:
        for e in entries:
            f.write(json.dumps(e) + "\n")
    return index


def write_bg_corpus(root: Path, n_categories=5, per_category=2, w=640, h=480,
                    with_splits=False):
    """Write background PNGs and their category-tagged JSONL index."""
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for cat in range(n_categories):
        for i in range(per_category):
            name = f"bg_c{cat:02d}_{i:02d}.png"
            save_png(root / name, background(seed=5000 + 100 * cat + i, w=w, h=h))
            entry = {"path": name, "category": f"category{cat:02d}"}
            if with_splits:
                entry["split"] = ("train", "val", "test")[cat % 3]
            entries.append(entry)
    index = root / "bg_index.jsonl"
    with open(index, "w") as f:
        for e in entries:
            f.write(json.dumps(e) + "\n")
    return index


@pytest.fixture(scope="session")
def echo_index(tmp_path_factory):
    return write_echo_corpus(tmp_path_factory.mktemp("echo"))


@pytest.fixture(scope="session")
def bg_index(tmp_path_factory):
    return write_bg_corpus(tmp_path_factory.mktemp("bg"))
