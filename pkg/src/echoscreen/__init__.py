"""Synthesis, rectification and evaluation of ultrasound screen photographs."""

from ._version import __version__
from .compositing import crop_reflection, insert_screen, screen_blend
from .datagen import (
    DatasetManifest,
    GenConfig,
    SampleRecord,
    blend_for_sample,
    build_dataset,
    load_manifest,
    synthesize_negative,
    synthesize_positive,
)
from .geometry import (
    Quad,
    QuadGenConfig,
    apply_homography,
    homography_from_points,
    invert_homography,
    min_corner_scale,
    random_quad,
)
from .metrics import (
    ClassifiedSample,
    ConfusionMatrix,
    EvalReport,
    bootstrap,
    confusion_from_predictions,
    corner_error_px,
    detection_rates,
    mse,
    ssim,
    uncertainty_reject,
)
from .model_io import (
    PredictionRecord,
    classification_loss,
    dsnt_decode,
    denormalize,
    ingest_predictions,
    localization_loss,
    multitask_loss,
    multitask_loss_grad_sigma,
    render_target_heatmaps,
)
from .rectify import RectifyConfig, normalize, rectify

__all__ = [
    "__version__",
    "ClassifiedSample",
    "ConfusionMatrix",
    "DatasetManifest",
    "EvalReport",
    "GenConfig",
    "PredictionRecord",
    "Quad",
    "QuadGenConfig",
    "RectifyConfig",
    "SampleRecord",
    "apply_homography",
    "blend_for_sample",
    "bootstrap",
    "build_dataset",
    "classification_loss",
    "confusion_from_predictions",
    "corner_error_px",
    "crop_reflection",
    "detection_rates",
    "denormalize",
    "dsnt_decode",
    "homography_from_points",
    "ingest_predictions",
    "insert_screen",
    "invert_homography",
    "load_manifest",
    "localization_loss",
    "min_corner_scale",
    "mse",
    "multitask_loss",
    "multitask_loss_grad_sigma",
    "normalize",
    "random_quad",
    "rectify",
    "render_target_heatmaps",
    "screen_blend",
    "ssim",
    "synthesize_negative",
    "synthesize_positive",
    "uncertainty_reject",
]
