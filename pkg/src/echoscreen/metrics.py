"""Evaluation math: localization error, detection rates, image quality,
bootstrap confidence intervals and uncertainty-based rejection."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import (
    AllRejected,
    EmptyClass,
    EmptyInput,
    ImageSmallerThanWindow,
    InvariantViolation,
    ParseError,
    ShapeMismatch,
)
from .geometry import Quad
from .images import luma, to_float
from .model_io import localization_loss

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 255.0


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary screen-detection counts, laid out as rows [[TP, FN], [FP, TN]]."""

    tp: int
    fn_: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn_, self.fp, self.tn) < 0:
            raise ValueError("counts must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([[self.tp, self.fn_], [self.fp, self.tn]], dtype=np.int64)

    def total(self) -> int:
        return self.tp + self.fn_ + self.fp + self.tn


@dataclass(frozen=True)
class EvalReport:
    """One bootstrapped metric: median point estimate and 95% interval."""

    metric_name: str
    point: float
    ci_low: float
    ci_high: float
    n_resamples: int
    subsample_frac: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ClassifiedSample:
    """One downstream classifier output with its confidence."""

    id: str
    true_class: str
    pred_class: str
    max_prob: float

    def __post_init__(self):
        if not 0.0 <= self.max_prob <= 1.0:
            raise InvariantViolation(
                f"max_prob must be in [0, 1], got {self.max_prob} (id={self.id})"
            )


def corner_error_px(pred: Quad, ref: Quad) -> float:
    """Average Euclidean corner localization error in pixels (order-matched)."""
    return localization_loss(pred, ref)


def detection_rates(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Sensitivity, specificity and balanced accuracy of a confusion matrix."""
    if cm.tp + cm.fn_ == 0 or cm.fp + cm.tn == 0:
        raise EmptyClass("both true classes must be populated")
    sens = cm.tp / (cm.tp + cm.fn_)
    spec = cm.tn / (cm.tn + cm.fp)
    return sens, spec, (sens + spec) / 2.0


def confusion_from_predictions(samples, threshold: float = 0.5) -> ConfusionMatrix:
    """Count a confusion matrix from (screen_prob, label) pairs.

    A sample is predicted positive when its probability is at or above the
    threshold.
    """
    samples = list(samples)
    if not samples:
        raise EmptyInput("no prediction pairs")
    tp = fn_ = fp = tn = 0
    for prob, label in samples:
        pred = prob >= threshold
        if label:
            tp, fn_ = (tp + 1, fn_) if pred else (tp, fn_ + 1)
        else:
            fp, tn = (fp + 1, tn) if pred else (fp, tn + 1)
    return ConfusionMatrix(tp=tp, fn_=fn_, fp=fp, tn=tn)


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error on [0, 1]-scaled intensities."""
    a = to_float(a)
    b = to_float(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def _ssim_window() -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    g = np.exp(-((np.arange(SSIM_WINDOW) - half) ** 2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def _window_mean(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    # Separable Gaussian-weighted window mean; borders cropped later.
    return correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity of two grayscale images.

    Uses the standard 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
    K2 = 0.03 on a 255-level dynamic range, averaged over windows fully
    inside both images.
    """
    a = luma(to_float(a)) * SSIM_RANGE
    b = luma(to_float(b)) * SSIM_RANGE
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ImageSmallerThanWindow(f"image {w}x{h} is smaller than the "
                                     f"{SSIM_WINDOW}x{SSIM_WINDOW} window")
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    g = _ssim_window()
    mu_a = _window_mean(a, g)
    mu_b = _window_mean(b, g)
    var_a = _window_mean(a * a, g) - mu_a**2
    var_b = _window_mean(b * b, g) - mu_b**2
    cov = _window_mean(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    half = SSIM_WINDOW // 2
    ssim_map = (num / den)[half:-half, half:-half]
    return float(ssim_map.mean())


def bootstrap(values, statistic, n_resamples: int = 1000, frac: float = 0.8,
              seed: int = 0, name: str = "statistic") -> EvalReport:
    """Subsampling bootstrap: median and 95% percentile interval.

    Draws n_resamples subsets of size ceil(frac * N) without replacement,
    applies the statistic to each, and reports the median of the resulting
    distribution with its 2.5 and 97.5 percentiles. Deterministic for a given
    seed.
    """
    vals = np.asarray(values)
    n = len(vals)
    if n == 0:
        raise EmptyInput("no values to bootstrap")
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"frac must be in (0, 1], got {frac}")
    m = math.ceil(frac * n)
    rng = np.random.default_rng(seed)
    stats = np.empty(n_resamples, dtype=np.float64)
    for i in range(n_resamples):
        idx = rng.choice(n, size=m, replace=False)
        stats[i] = statistic(vals[idx])
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return EvalReport(
        metric_name=name,
        point=float(np.median(stats)),
        ci_low=float(lo),
        ci_high=float(hi),
        n_resamples=n_resamples,
        subsample_frac=frac,
    )


def balanced_accuracy(samples: list[ClassifiedSample]) -> float:
    """Mean per-class recall over the classes present in the true labels."""
    if not samples:
        raise EmptyInput("no classified samples")
    classes = sorted({s.true_class for s in samples})
    recalls = []
    for c in classes:
        of_class = [s for s in samples if s.true_class == c]
        recalls.append(sum(s.pred_class == c for s in of_class) / len(of_class))
    return float(np.mean(recalls))


def uncertainty_reject(samples: list[ClassifiedSample],
                       reject_frac: float) -> tuple[list[ClassifiedSample], float]:
    """Drop the most uncertain fraction of samples, then score the rest.

    Uncertainty is the (low) maximum class probability; floor(reject_frac * N)
    samples are removed in ascending (max_prob, id) order. Returns the kept
    samples, most uncertain first, with their balanced accuracy.
    """
    if not samples:
        raise EmptyInput("no classified samples")
    if not 0.0 <= reject_frac < 1.0:
        raise ValueError(f"reject_frac must be in [0, 1), got {reject_frac}")
    ranked = sorted(samples, key=lambda s: (s.max_prob, s.id))
    kept = ranked[math.floor(reject_frac * len(ranked)):]
    if not kept:
        raise AllRejected("rejection removed every sample")
    return kept, balanced_accuracy(kept)


def load_classified_samples(path: str | Path) -> list[ClassifiedSample]:
    """Read downstream classifier outputs from JSONL
    {id, true_class, pred_class, max_prob}."""
    path = Path(path)
    samples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                samples.append(ClassifiedSample(
                    id=str(obj["id"]),
                    true_class=str(obj["true_class"]),
                    pred_class=str(obj["pred_class"]),
                    max_prob=float(obj["max_prob"]),
                ))
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return samples
