"""Command line front end: dataset synthesis, rectification and evaluation.

Exit codes: 0 on success, 1 on operational errors (I/O, generation,
unresolvable ids), 2 on invalid arguments.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from .datagen import GenConfig, build_dataset, load_manifest
from .errors import EchoScreenError
from .geometry import Quad
from .images import bilinear_resize, load_image, save_png, to_u8
from .metrics import (
    bootstrap,
    confusion_from_predictions,
    detection_rates,
    load_classified_samples,
    mse,
    ssim,
    uncertainty_reject,
)
from .model_io import ingest_predictions
from .rectify import RectifyConfig, normalize, rectify

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _parse_target(text: str) -> tuple[int, int]:
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected WxH (e.g. 640x480), got {text!r}")
    return int(m.group(1)), int(m.group(2))


def _parse_fracs(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("expected at least one fraction")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echoscreen",
        description="Synthesize, rectify and evaluate photographs of ultrasound screens.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a self-annotated synthetic dataset")
    p.add_argument("echo_index", help="JSONL index of echo frames {path, patient_id, split?}")
    p.add_argument("bg_index", help="JSONL index of backgrounds {path, category, split?}")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    p.add_argument("--n", type=int, default=None, help="cap on echo frames used")
    p.add_argument("--alpha-min", type=float, default=0.5, help="lower reflection alpha")
    p.add_argument("--alpha-max", type=float, default=0.95, help="upper reflection alpha")
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rectify", help="warp detected screens onto the canonical grid")
    p.add_argument("photos", help="directory of input photos searched recursively")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="manifest.jsonl with ground-truth corners")
    src.add_argument("--predictions", help="predictions.jsonl with model corners")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--target", type=_parse_target, default=(640, 480), metavar="WxH",
                   help="canonical grid size (default 640x480)")
    p.add_argument("--normalize", action="store_true",
                   help="apply background-subtracting normalization")
    p.add_argument("--skip-missing", action="store_true",
                   help="warn instead of failing on photos without corners")
    p.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("eval", help="score predictions against a manifest")
    p.add_argument("--manifest", required=True, help="manifest.jsonl with ground truth")
    p.add_argument("--predictions", required=True, help="predictions.jsonl to score")
    p.add_argument("--threshold", type=float, default=0.5, help="detection threshold")
    p.add_argument("--resamples", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--frac", type=float, default=0.8, help="bootstrap subsample fraction")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--rectified", help="directory of rectified outputs to score as MSE/SSIM")
    p.add_argument("--classifier", help="JSONL of downstream classifier outputs")
    p.add_argument("--reject", type=_parse_fracs, default=[0.0, 0.2, 0.4],
                   help="comma-separated rejection fractions (default 0,0.2,0.4)")
    p.add_argument("--out", help="directory to write report.json into")
    p.add_argument("--json", action="store_true", help="print the JSON report on stdout")
    p.set_defaults(func=cmd_eval)
    return parser


def cmd_synth(args) -> int:
    for index in (args.echo_index, args.bg_index):
        if not Path(index).exists():
            print(f"error: index file not found: {index}", file=sys.stderr)
            return 1
    cfg = GenConfig(alpha_range=(args.alpha_min, args.alpha_max), master_seed=args.seed)
    manifest = build_dataset(args.echo_index, args.bg_index, cfg, args.out,
                             jobs=args.jobs, n_frames=args.n)
    counts = manifest.counts()
    if args.json:
        print(json.dumps({
            "out": str(args.out),
            "seed": args.seed,
            "splits": {s: {"with_screen": p, "without_screen": n, "total": t}
                       for s, (p, n, t) in counts.items()},
        }, indent=2))
    else:
        for split, (pos, neg, total) in counts.items():
            print(f"{split}: {pos} with screen / {neg} without screen / {total} total")
        grand = sum(t for _, _, t in counts.values())
        print(f"wrote {grand} samples to {args.out}")
    return 0


def _corner_sources(args) -> tuple[dict[str, np.ndarray | None], int]:
    """Map sample id to corners (None = known sample without a screen).

    Second value counts corners that were decoded from heatmaps.
    """
    if args.manifest:
        manifest = load_manifest(args.manifest)
        return {r.id: (None if r.corners is None else r.corners.corners)
                for r in manifest.records}, 0
    records = ingest_predictions(args.predictions)
    decoded = sum(r.corners_from_heatmaps for r in records)
    return {r.id: (None if r.corners_px is None else r.corners_px) for r in records}, decoded


def cmd_rectify(args) -> int:
    photos_dir = Path(args.photos)
    if not photos_dir.is_dir():
        print(f"error: photos directory not found: {photos_dir}", file=sys.stderr)
        return 1
    photos = sorted(p for p in photos_dir.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
    corners_by_id, decoded = _corner_sources(args)
    if decoded:
        print(f"derived corners from heatmaps for {decoded} records")

    missing = [p.stem for p in photos if p.stem not in corners_by_id]
    if missing and not args.skip_missing:
        print(f"error: no corners for {len(missing)} photos "
              f"(first: {missing[0]}); use --skip-missing to continue", file=sys.stderr)
        return 1

    tw, th = args.target
    cfg = RectifyConfig(target_w=tw, target_h=th)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    processed = no_screen = failed = 0
    for photo in photos:
        if photo.stem in missing:
            continue
        corners = corners_by_id[photo.stem]
        if corners is None:
            no_screen += 1
            continue
        try:
            warped = rectify(load_image(photo), Quad(corners), cfg)
        except EchoScreenError as exc:
            print(f"warning: {photo.stem}: {exc}", file=sys.stderr)
            failed += 1
            continue
        out_img = normalize(warped) if args.normalize else to_u8(warped)
        save_png(out_dir / f"{photo.stem}.png", out_img)
        processed += 1

    summary = {"processed": processed, "no_screen": no_screen,
               "missing": len(missing), "failed": failed}
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"processed {processed} / no screen {no_screen} / "
              f"missing {len(missing)} / failed {failed}")
    return 0


def _rate_statistic(label_value: int, threshold: float):
    def stat(pairs: np.ndarray) -> float:
        of_class = pairs[pairs[:, 1] == label_value]
        if len(of_class) == 0:
            return float("nan")
        hits = of_class[:, 0] >= threshold if label_value else of_class[:, 0] < threshold
        return float(np.mean(hits))
    return stat


def _report_dict(r) -> dict:
    return {"median": r.point, "ci_low": r.ci_low, "ci_high": r.ci_high}


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest)
    by_id = manifest.by_id()
    predictions = ingest_predictions(args.predictions)
    unknown = [p.id for p in predictions if p.id not in by_id]
    if unknown:
        print(f"error: {len(unknown)} prediction ids not in manifest "
              f"(first: {unknown[0]})", file=sys.stderr)
        return 1

    report: dict = {
        "n_resamples": args.resamples,
        "subsample_frac": args.frac,
        "seed": args.seed,
        "threshold": args.threshold,
    }

    try:
        report["detection"] = _eval_detection(predictions, by_id, args)
    except Exception as exc:
        report["detection"] = {"error": str(exc)}
    try:
        loc = _eval_localization(predictions, by_id, args)
        if loc is not None:
            report["localization"] = loc
    except Exception as exc:
        report["localization"] = {"error": str(exc)}
    if args.rectified:
        try:
            report["reconstruction"] = _eval_reconstruction(manifest, args)
        except Exception as exc:
            report["reconstruction"] = {"error": str(exc)}
    if args.classifier:
        try:
            report["rejection"] = _eval_rejection(args)
        except Exception as exc:
            report["rejection"] = {"error": str(exc)}

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "report.json", "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        _print_report(report)
    return 0


def _eval_detection(predictions, by_id, args) -> dict:
    pairs = [(p.screen_prob, int(by_id[p.id].screen_present)) for p in predictions]
    cm = confusion_from_predictions(pairs, threshold=args.threshold)
    sens, spec, bal = detection_rates(cm)
    arr = np.asarray(pairs, dtype=np.float64)
    sens_boot = bootstrap(arr, _rate_statistic(1, args.threshold), args.resamples,
                          args.frac, args.seed, name="sensitivity")
    spec_boot = bootstrap(arr, _rate_statistic(0, args.threshold), args.resamples,
                          args.frac, args.seed, name="specificity")
    return {
        "confusion": {"tp": cm.tp, "fn": cm.fn_, "fp": cm.fp, "tn": cm.tn},
        "sensitivity": {"point": sens, **_report_dict(sens_boot)},
        "specificity": {"point": spec, **_report_dict(spec_boot)},
        "balanced_accuracy": bal,
    }


def _eval_localization(predictions, by_id, args) -> dict | None:
    errors = []
    for p in predictions:
        ref = by_id[p.id]
        if p.corners_px is None or ref.corners is None:
            continue
        d = np.sqrt(((p.corners_px - ref.corners.corners) ** 2).sum(axis=1))
        errors.append(float(d.mean()))
    if not errors:
        return None
    boot = bootstrap(np.asarray(errors), np.median, args.resamples, args.frac,
                     args.seed, name="corner_error_px")
    return {"n_samples": len(errors), **_report_dict(boot)}


def _eval_reconstruction(manifest, args) -> dict:
    rect_dir = Path(args.rectified)
    mses, ssims = [], []
    for r in manifest.records:
        if not r.screen_present:
            continue
        path = rect_dir / f"{r.id}.png"
        if not path.exists():
            continue
        rectified = normalize(load_image(path))
        reference = load_image(r.echo_source)
        rh, rw = rectified.shape[:2]
        if reference.shape[:2] != (rh, rw):
            reference = bilinear_resize(reference, rw, rh)
        reference = normalize(reference)
        mses.append(mse(rectified, reference))
        ssims.append(ssim(rectified, reference))
    if not mses:
        return {"n_samples": 0}
    out = {"n_samples": len(mses)}
    for name, values in (("mse", mses), ("ssim", ssims)):
        boot = bootstrap(np.asarray(values), np.median, args.resamples, args.frac,
                         args.seed, name=name)
        out[name] = _report_dict(boot)
    return out


def _eval_rejection(args) -> list[dict]:
    samples = load_classified_samples(args.classifier)
    curve = []
    for frac in args.reject:
        kept, acc = uncertainty_reject(samples, frac)
        curve.append({"reject_frac": frac, "balanced_accuracy": acc, "n_kept": len(kept)})
    return curve


def _print_report(report: dict) -> None:
    det = report.get("detection", {})
    if "confusion" in det:
        c = det["confusion"]
        print(f"detection (threshold {report['threshold']}): "
              f"confusion [[{c['tp']}, {c['fn']}], [{c['fp']}, {c['tn']}]]")
        for key in ("sensitivity", "specificity"):
            d = det[key]
            print(f"  {key}: {d['point']:.4f} "
                  f"(bootstrap median {d['median']:.4f}, "
                  f"95% CI [{d['ci_low']:.4f}, {d['ci_high']:.4f}])")
        print(f"  balanced accuracy: {det['balanced_accuracy']:.4f}")
    elif det:
        print(f"detection: error: {det['error']}")
    loc = report.get("localization")
    if loc and "median" in loc:
        print(f"localization error: median {loc['median']:.3f} px, "
              f"95% CI [{loc['ci_low']:.3f}, {loc['ci_high']:.3f}], "
              f"n={loc['n_samples']}")
    elif loc:
        print(f"localization: error: {loc['error']}")
    rec = report.get("reconstruction")
    if rec and "mse" in rec:
        print(f"reconstruction (n={rec['n_samples']}): "
              f"MSE median {rec['mse']['median']:.4f}, "
              f"SSIM median {rec['ssim']['median']:.4f}")
    elif rec is not None and "error" in rec:
        print(f"reconstruction: error: {rec['error']}")
    rej = report.get("rejection")
    if isinstance(rej, list):
        for row in rej:
            print(f"rejection {row['reject_frac']:.0%}: "
                  f"balanced accuracy {row['balanced_accuracy']:.4f} "
                  f"(n={row['n_kept']})")
    elif isinstance(rej, dict):
        print(f"rejection: error: {rej['error']}")
    print(f"bootstrap: {report['n_resamples']} resamples at "
          f"{report['subsample_frac']:.0%} (seed {report['seed']})")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except EchoScreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # Invalid parameter values that argparse cannot vet (e.g. reversed ranges).
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
