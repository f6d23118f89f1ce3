"""Self-annotated synthetic dataset construction.

Every echo frame contributes two positive scenes (the same blended screen
inserted into two different backgrounds) and two negative scenes (plain
resized backgrounds), keeping each split exactly class-balanced. Echo frames
are split at patient level, backgrounds at category level, and reflection and
scene backgrounds are only ever drawn from the pool of the sample's own
split.

All randomness derives from the master seed through one seed sequence per
frame, so builds are reproducible bit-for-bit at any parallelism.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._version import __version__
from .compositing import crop_reflection, insert_screen, screen_blend
from .errors import InsufficientData, InvariantViolation, ParseError
from .geometry import Quad, QuadGenConfig, random_quad
from .images import bilinear_resize, load_image, match_channels, save_png

SPLITS = ("train", "val", "test")
ECHO_SPLIT_FRACS = (0.75, 0.18, 0.07)
BG_SPLIT_FRACS = (50 / 67, 12 / 67, 5 / 67)
SEED_MAX = 2**63


@dataclass(frozen=True)
class GenConfig:
    """Scene geometry and reflection-strength distribution for generation."""

    scene_w: int = 640
    scene_h: int = 480
    alpha_range: tuple[float, float] = (0.5, 0.95)
    p_no_reflection: float = 0.1
    quad: QuadGenConfig = field(default_factory=lambda: QuadGenConfig(
        min_area_px2=16384.0, min_corner_scale=0.08))
    master_seed: int = 0

    def __post_init__(self):
        lo, hi = self.alpha_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise ValueError(f"alpha_range must be within [0, 1], got ({lo}, {hi})")
        if not 0.0 <= self.p_no_reflection <= 1.0:
            raise ValueError("p_no_reflection must be a probability")
        if self.scene_w < 16 or self.scene_h < 16:
            raise ValueError("scene dims must be >= 16")


@dataclass
class SampleRecord:
    """Annotation for one generated scene.

    Positive samples carry the screen quad, the echo frame used, and the
    blend alpha; negatives carry only their background. reflection_source is
    present only when a reflection was actually blended (alpha < 1).
    """

    id: str
    split: str
    screen_present: bool
    background_source: str
    seed: int
    corners: Quad | None = None
    echo_source: str | None = None
    reflection_source: str | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InvariantViolation(f"unknown split {self.split!r} (id={self.id})")
        present = (self.corners is not None, self.echo_source is not None, self.alpha is not None)
        if self.screen_present and not all(present):
            raise InvariantViolation(
                f"positive sample must carry corners, echo_source and alpha (id={self.id})"
            )
        if not self.screen_present and any(present):
            raise InvariantViolation(
                f"negative sample must not carry screen fields (id={self.id})"
            )

    def to_json_obj(self) -> dict:
        obj = {
            "id": self.id,
            "split": self.split,
            "screen_present": self.screen_present,
            "background_source": self.background_source,
            "seed": int(self.seed),
        }
        if self.screen_present:
            obj["corners"] = self.corners.to_list()
            obj["echo_source"] = self.echo_source
            obj["alpha"] = self.alpha
        if self.reflection_source is not None:
            obj["reflection_source"] = self.reflection_source
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SampleRecord":
        corners = obj.get("corners")
        return cls(
            id=obj["id"],
            split=obj["split"],
            screen_present=obj["screen_present"],
            background_source=obj["background_source"],
            seed=obj["seed"],
            corners=None if corners is None else Quad.from_list(corners),
            echo_source=obj.get("echo_source"),
            reflection_source=obj.get("reflection_source"),
            alpha=obj.get("alpha"),
        )


@dataclass
class DatasetManifest:
    """All records of one build plus the parameters that produced it."""

    records: list[SampleRecord]
    scene_w: int
    scene_h: int
    generator_version: str
    master_seed: int

    def validate(self) -> None:
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("duplicate sample ids in manifest")
        for split in SPLITS:
            pos = sum(r.screen_present for r in self.records if r.split == split)
            neg = sum(not r.screen_present for r in self.records if r.split == split)
            if pos != neg:
                raise InvariantViolation(
                    f"split {split} is unbalanced: {pos} with screen vs {neg} without"
                )

    def counts(self) -> dict[str, tuple[int, int, int]]:
        """Per-split (with screen, without screen, total)."""
        out = {}
        for split in SPLITS:
            pos = sum(r.screen_present for r in self.records if r.split == split)
            neg = sum(not r.screen_present for r in self.records if r.split == split)
            out[split] = (pos, neg, pos + neg)
        return out

    def by_id(self) -> dict[str, SampleRecord]:
        return {r.id: r for r in self.records}

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as f:
            for r in self.records:
                f.write(json.dumps(r.to_json_obj()) + "\n")
        meta = {
            "scene_w": self.scene_w,
            "scene_h": self.scene_h,
            "generator_version": self.generator_version,
            "master_seed": int(self.master_seed),
        }
        with open(out_dir / "dataset.json", "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2)
            f.write("\n")


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read manifest.jsonl (and the dataset.json sidecar when present)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.jsonl"
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(SampleRecord.from_json_obj(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            except KeyError as exc:
                raise ParseError(f"{path}:{lineno}: missing field {exc}") from exc
    meta_path = path.parent / "dataset.json"
    meta = {}
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
    return DatasetManifest(
        records=records,
        scene_w=meta.get("scene_w", 0),
        scene_h=meta.get("scene_h", 0),
        generator_version=meta.get("generator_version", ""),
        master_seed=meta.get("master_seed", 0),
    )


@lru_cache(maxsize=32)
def _load_source(path: str) -> np.ndarray:
    # Cached read-only float image; callers must not mutate the result.
    return load_image(path)


def frame_seed(master_seed: int, frame_index: int) -> int:
    """Independent per-frame seed derived from the master seed."""
    ss = np.random.SeedSequence([int(master_seed), int(frame_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _blend_draw(rng: np.random.Generator, echo: np.ndarray, bg_pool: list[str],
                cfg: GenConfig):
    """Draw the reflection blend for one frame from an already-seeded stream.

    Returns (blended screen, alpha, reflection source or None). Kept separate
    from synthesize_positive so the exact screen content of a sample can be
    reproduced from its recorded seed.
    """
    eh, ew = echo.shape[:2]
    if rng.random() < cfg.p_no_reflection:
        return echo, 1.0, None
    refl_idx = int(rng.integers(len(bg_pool)))
    crop_seed = int(rng.integers(SEED_MAX))
    alpha = float(rng.uniform(*cfg.alpha_range))
    reflection_source = bg_pool[refl_idx]
    reflection = crop_reflection(_load_source(reflection_source), ew, eh, crop_seed)
    reflection = match_channels(reflection, 1 if echo.ndim == 2 else 3)
    return screen_blend(echo, reflection, alpha), alpha, reflection_source


def blend_for_sample(echo: np.ndarray, bg_pool: list[str], cfg: GenConfig,
                     sample_seed: int) -> np.ndarray:
    """Reconstruct the blended screen B that a recorded sample seed produced."""
    rng = np.random.default_rng(sample_seed)
    blended, _, _ = _blend_draw(rng, np.asarray(echo, dtype=np.float64), bg_pool, cfg)
    return blended


def synthesize_positive(echo: np.ndarray, bg_pool: list[str], cfg: GenConfig,
                        sample_seed: int, *, echo_source: str = "",
                        id_prefix: str = "sample", split: str = "train"):
    """Two annotated positive scenes from one echo frame.

    Draws the reflection strength (alpha = 1 with probability
    p_no_reflection, otherwise uniform in alpha_range), blends a reflection
    cropped from a random pool background onto the frame, then inserts the
    blend into two distinct pool backgrounds under independently drawn quads.
    Fully deterministic for a given sample_seed.
    """
    if len(bg_pool) < 2:
        raise InsufficientData("need at least 2 backgrounds for a positive pair")
    echo = np.asarray(echo, dtype=np.float64)
    rng = np.random.default_rng(sample_seed)
    blended, alpha, reflection_source = _blend_draw(rng, echo, bg_pool, cfg)
    bg_idx = rng.choice(len(bg_pool), size=2, replace=False)
    out = []
    for i, idx in enumerate(bg_idx):
        quad_seed = int(rng.integers(SEED_MAX))
        scene_bg = bilinear_resize(_load_source(bg_pool[idx]), cfg.scene_w, cfg.scene_h)
        quad = random_quad(quad_seed, cfg.scene_w, cfg.scene_h, cfg.quad)
        scene, _ = insert_screen(scene_bg, blended, quad)
        record = SampleRecord(
            id=f"{id_prefix}-p{i}",
            split=split,
            screen_present=True,
            background_source=bg_pool[idx],
            seed=sample_seed,
            corners=quad,
            echo_source=echo_source,
            reflection_source=reflection_source,
            alpha=alpha,
        )
        out.append((scene, record))
    return out


def synthesize_negative(bg: np.ndarray, cfg: GenConfig, *, background_source: str = "",
                        sample_id: str = "negative", split: str = "train",
                        sample_seed: int = 0):
    """One screen-free scene: the background resized to scene dimensions."""
    scene = bilinear_resize(np.asarray(bg, dtype=np.float64), cfg.scene_w, cfg.scene_h)
    record = SampleRecord(
        id=sample_id,
        split=split,
        screen_present=False,
        background_source=background_source,
        seed=sample_seed,
    )
    return scene, record


def load_index(path: str | Path, entity_field: str) -> list[dict]:
    """Read a JSONL index of {path, <entity_field>, split?}.

    Relative image paths are resolved against the index file's directory.
    """
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "path" not in obj or entity_field not in obj:
                raise ParseError(f"{path}:{lineno}: need fields 'path' and {entity_field!r}")
            p = Path(obj["path"])
            if not p.is_absolute():
                p = path.parent / p
            split = obj.get("split")
            if split is not None and split not in SPLITS:
                raise ParseError(f"{path}:{lineno}: unknown split {split!r}")
            entries.append({"path": str(p), entity_field: str(obj[entity_field]), "split": split})
    if not entries:
        raise InsufficientData(f"index {path} is empty")
    return entries


def _largest_remainder_counts(n: int, fracs: tuple[float, ...]) -> list[int]:
    targets = [f * n for f in fracs]
    counts = [int(t) for t in targets]
    order = sorted(range(len(fracs)), key=lambda i: targets[i] - counts[i], reverse=True)
    for i in range(n - sum(counts)):
        counts[order[i % len(order)]] += 1
    return counts


def assign_splits(entities: list[str], explicit: dict[str, str],
                  fracs: tuple[float, ...], rng: np.random.Generator) -> dict[str, str]:
    """Assign whole entities (patients or categories) to splits.

    Entities with an explicit split keep it. The rest are shuffled and dealt
    to bring split sizes toward the target fractions; every split receives at
    least one entity when enough exist.
    """
    entities = sorted(set(entities))
    if len(entities) < len(SPLITS) and len(explicit) < len(entities):
        raise InsufficientData(
            f"need at least {len(SPLITS)} entities to populate all splits, got {len(entities)}"
        )
    counts = _largest_remainder_counts(len(entities), fracs)
    # Guarantee non-empty splits by stealing from the largest allocation.
    for i in range(len(counts)):
        while counts[i] == 0:
            counts[int(np.argmax(counts))] -= 1
            counts[i] += 1
    assignment = {}
    deficits = dict(zip(SPLITS, counts))
    for entity in entities:
        if entity in explicit:
            assignment[entity] = explicit[entity]
            deficits[explicit[entity]] -= 1
    pool = [e for e in entities if e not in explicit]
    rng.shuffle(pool)
    cursor = 0
    for split in SPLITS:
        take = max(0, deficits[split])
        for entity in pool[cursor:cursor + take]:
            assignment[entity] = split
        cursor += take
    for entity in pool[cursor:]:
        assignment[entity] = SPLITS[0]
    return assignment


def _split_map(entries: list[dict], entity_field: str, fracs: tuple[float, ...],
               rng: np.random.Generator) -> dict[str, str]:
    explicit = {}
    for e in entries:
        if e["split"] is not None:
            prev = explicit.get(e[entity_field])
            if prev is not None and prev != e["split"]:
                raise InvariantViolation(
                    f"{entity_field} {e[entity_field]!r} is tagged with two splits"
                )
            explicit[e[entity_field]] = e["split"]
    return assign_splits([e[entity_field] for e in entries], explicit, fracs, rng)


@dataclass(frozen=True)
class _FrameTask:
    frame_index: int
    ordinal: int  # per-split frame counter, used for ids
    split: str
    echo_path: str
    bg_pool: tuple[str, ...]
    cfg: GenConfig
    out_dir: str
    master_seed: int


def _run_frame_task(task: _FrameTask) -> list[SampleRecord]:
    seed = frame_seed(task.master_seed, task.frame_index)
    prefix = f"{task.split}-{task.ordinal:06d}"
    echo = _load_source(task.echo_path)
    pairs = synthesize_positive(
        echo, list(task.bg_pool), task.cfg, seed,
        echo_source=task.echo_path, id_prefix=prefix, split=task.split,
    )
    rng = np.random.default_rng(np.random.SeedSequence([task.master_seed, task.frame_index, 1]))
    neg_idx = rng.choice(len(task.bg_pool), size=2, replace=False)
    for i, idx in enumerate(neg_idx):
        bg = _load_source(task.bg_pool[idx])
        pairs.append(synthesize_negative(
            bg, task.cfg, background_source=task.bg_pool[idx],
            sample_id=f"{prefix}-n{i}", split=task.split, sample_seed=seed,
        ))
    split_dir = Path(task.out_dir) / task.split
    split_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for scene, record in pairs:
        save_png(split_dir / f"{record.id}.png", scene)
        records.append(record)
    return records


def build_dataset(echo_index: str | Path, bg_index: str | Path, cfg: GenConfig,
                  out_dir: str | Path, jobs: int = 1,
                  n_frames: int | None = None) -> DatasetManifest:
    """Generate a full dataset and write images plus manifest to out_dir.

    Echo frames are taken in index order (optionally capped at n_frames);
    each yields 2 positives and 2 negatives in its patient's split. Identical
    inputs and master seed give byte-identical outputs at any job count.
    """
    echoes = load_index(echo_index, "patient_id")
    bgs = load_index(bg_index, "category")
    echo_rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, 0xE50]))
    bg_rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, 0xB60]))
    patient_split = _split_map(echoes, "patient_id", ECHO_SPLIT_FRACS, echo_rng)
    category_split = _split_map(bgs, "category", BG_SPLIT_FRACS, bg_rng)

    bg_pools = {split: tuple(sorted(
        e["path"] for e in bgs if category_split[e["category"]] == split
    )) for split in SPLITS}
    for split, pool in bg_pools.items():
        if len(pool) < 2:
            raise InsufficientData(f"split {split} has {len(pool)} backgrounds, needs >= 2")

    frames = echoes if n_frames is None else echoes[:n_frames]
    tasks = []
    ordinals = dict.fromkeys(SPLITS, 0)
    for frame_index, entry in enumerate(frames):
        split = patient_split[entry["patient_id"]]
        tasks.append(_FrameTask(
            frame_index=frame_index,
            ordinal=ordinals[split],
            split=split,
            echo_path=entry["path"],
            bg_pool=bg_pools[split],
            cfg=cfg,
            out_dir=str(out_dir),
            master_seed=cfg.master_seed,
        ))
        ordinals[split] += 1
    for split in SPLITS:
        if ordinals[split] == 0:
            raise InsufficientData(f"split {split} received no echo frames")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_frame = list(pool.map(_run_frame_task, tasks, chunksize=4))
    else:
        per_frame = [_run_frame_task(t) for t in tasks]

    manifest = DatasetManifest(
        records=[r for frame in per_frame for r in frame],
        scene_w=cfg.scene_w,
        scene_h=cfg.scene_h,
        generator_version=__version__,
        master_seed=cfg.master_seed,
    )
    manifest.validate()
    manifest.write(out_dir)
    return manifest
