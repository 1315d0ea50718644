"""Controlled demonstration of the augment-then-split pitfall.

Generates a small synthetic corpus, trains the same trivial classifier
under two protocols that differ in one step only, and measures both the
accuracy gap and the leakage each protocol produces:

  flawed  augment every image first, then split. Augmented siblings of the
          same source scatter across train and eval, so evaluation scores
          partly measure memorization of near-copies.
  sound   split first, then augment the train partition only. Evaluation
          images have no siblings anywhere in training.

The classifier is nearest-neighbor on perceptual hashes. It is deliberately
weak; the point is not its accuracy but that the identical model appears
much stronger under the flawed protocol, and that the leak scans flag
exactly the arm that cheats.
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hashing, images
from .audit import ExclusionLedger, apply_exclusions
from .augment import AugmentPlan, OpSpec, aug_id, augment_training_set, generate_copies
from .leakage import (
    LeakageSummary,
    cross_split_scan,
    leakage_rate,
    transform_invariant_scan,
)
from .manifest import DatasetManifest, ImageRecord
from .metrics import MetricReport, PredictionRecord, evaluate
from .splits import SplitManifest, SplitSpec, stratified_holdout

MEM_PREFIX = "mem://"


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of the generated corpus.

    Classes are blob shades: each image is one filled disc on a noisy gray
    background, and the class fixes the disc's brightness band. Geometry
    (center, radius) and noise vary per image, so nearest-neighbor hashing
    gets real signal without being trivially perfect.
    """

    n_classes: int = 4
    per_class: int = 50
    image_size: int = 48
    noise: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.n_classes}")
        if self.per_class < 4:
            raise ValueError(f"need at least 4 images per class, got {self.per_class}")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"shade{i}" for i in range(self.n_classes))

    def class_level(self, class_index: int) -> int:
        """Evenly spaced blob brightness, darkest to brightest."""
        lo, hi = 25, 230
        return round(lo + class_index * (hi - lo) / (self.n_classes - 1))


def synth_raster(spec: SyntheticSpec, class_index: int, image_index: int) -> np.ndarray:
    """One gray blob image as HxWx3 uint8, deterministic in all arguments."""
    rng = np.random.default_rng((spec.seed, class_index, image_index))
    s = spec.image_size
    bg = rng.integers(128 - spec.noise, 128 + spec.noise + 1, size=(s, s))
    level = spec.class_level(class_index) + int(rng.integers(-8, 9))
    radius = rng.uniform(0.15 * s, 0.30 * s)
    margin = int(math.ceil(radius)) + 1
    cy = rng.uniform(margin, s - 1 - margin)
    cx = rng.uniform(margin, s - 1 - margin)
    ys, xs = np.mgrid[0:s, 0:s]
    inside = (ys - cy) ** 2 + (xs - cx) ** 2 <= radius**2
    plane = np.where(inside, level, bg)
    plane = np.clip(plane, 0, 255).astype(np.uint8)
    return np.ascontiguousarray(np.stack([plane, plane, plane], axis=-1))


@dataclass(frozen=True)
class SyntheticCorpus:
    """Stamped manifest plus the in-memory rasters behind its mem:// paths."""

    manifest: DatasetManifest
    store: dict[str, np.ndarray]

    def loader(self, path: str) -> np.ndarray:
        return self.store[path.removeprefix(MEM_PREFIX)]


def _record_for(rid: str, label: str, raster: np.ndarray) -> ImageRecord:
    # raw raster bytes stand in for file bytes: identical rasters must
    # collide, distinct rasters must not
    return ImageRecord(
        id=rid,
        path=MEM_PREFIX + rid,
        label=label,
        byte_hash=hashing.compute_byte_hash(raster.tobytes()),
        phash=hashing.compute_phash(raster),
        width=raster.shape[1],
        height=raster.shape[0],
    )


def generate_corpus(spec: SyntheticSpec) -> SyntheticCorpus:
    records = []
    store: dict[str, np.ndarray] = {}
    for class_index, label in enumerate(spec.labels):
        for image_index in range(spec.per_class):
            rid = f"{label}_{image_index:03d}"
            raster = synth_raster(spec, class_index, image_index)
            store[rid] = raster
            records.append(_record_for(rid, label, raster))
    manifest = DatasetManifest(records=tuple(records))
    stamped, _report = apply_exclusions(manifest, ExclusionLedger(entries=()))
    return SyntheticCorpus(manifest=stamped, store=store)


def default_plan(seed: int) -> AugmentPlan:
    """Quarter-turn rotations plus a coin-flip mirror.

    Quarter turns of a square raster are exact pixel permutations, so two
    copies that draw the same parameters are byte-identical. That makes the
    flawed protocol leak through both channels the scans cover: exact byte
    duplicates and transform-related twins.
    """
    return AugmentPlan(
        seed=seed,
        copies_per_image=3,
        ops=(
            OpSpec(kind="rotate", params={"degrees": {"choices": [0, 90, 180, 270]}}),
            OpSpec(kind="flip_h", params={"prob": 0.5}),
        ),
    )


def knn_predictions(
    train: list[ImageRecord], evals: list[ImageRecord], labels: tuple[str, ...]
) -> list[PredictionRecord]:
    """Nearest neighbor by perceptual-hash distance, with soft scores.

    The prediction is the label of the closest training image (ties go to
    the smallest distance, then the smallest training id). The probability
    for each label is its best similarity 1 - d/64 across that label's
    training images, normalized; the predicted label always holds the top
    score because its nearest neighbor is the global minimum distance.
    """
    out = []
    for ev in evals:
        best_by_label = {label: 64 for label in labels}
        best_dist, best_rec = 65, None
        for tr in train:
            d = hashing.hamming(ev.phash, tr.phash)
            if d < best_by_label[tr.label]:
                best_by_label[tr.label] = d
            if d < best_dist or (d == best_dist and tr.id < best_rec.id):
                best_dist, best_rec = d, tr
        sims = {label: 1.0 - best_by_label[label] / 64.0 for label in labels}
        total = sum(sims.values())
        if total > 0:
            probs = {label: s / total for label, s in sims.items()}
        else:
            probs = {label: 1.0 / len(labels) for label in labels}
        out.append(
            PredictionRecord(
                image_id=ev.id,
                true_label=ev.label,
                predicted_label=best_rec.label,
                probabilities=probs,
            )
        )
    return out


@dataclass(frozen=True)
class ArmResult:
    """One protocol arm: metrics on the test partition plus leak-scan output."""

    protocol: str
    report: MetricReport
    leakage: LeakageSummary
    n_train: int
    n_test: int

    @property
    def accuracy(self) -> float:
        return self.report.accuracy

    def to_json_obj(self) -> dict:
        return {
            "protocol": self.protocol,
            "accuracy": self.accuracy,
            "macro_f1": self.report.macro_f1,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "leakage_rate": self.leakage.rate,
            "leakage_findings": self.leakage.findings_count,
        }


def _evaluate_arm(
    protocol: str,
    manifest: DatasetManifest,
    split: SplitManifest,
    labels: tuple[str, ...],
    loader,
) -> ArmResult:
    by_id = manifest.by_id()
    train = [by_id[rid] for rid in split.part("train")]
    test = [by_id[rid] for rid in split.part("test")]
    predictions = knn_predictions(train, test, labels)
    report = evaluate(predictions, list(labels))
    findings = cross_split_scan(manifest, split) + transform_invariant_scan(
        manifest, split, loader=loader
    )
    return ArmResult(
        protocol=protocol,
        report=report,
        leakage=leakage_rate(findings, split),
        n_train=len(train),
        n_test=len(test),
    )


def run_flawed(corpus: SyntheticCorpus, plan: AugmentPlan, split_seed: int) -> ArmResult:
    """Augment the whole corpus, then split: the pitfall, reproduced."""
    records = list(corpus.manifest.records)
    store = dict(corpus.store)
    for rec in corpus.manifest.records:
        raster = corpus.store[rec.id]
        for copy_index, _ops, out_raster in generate_copies(rec.id, raster, plan):
            new_id = aug_id(rec.id, copy_index)
            store[new_id] = out_raster
            records.append(_record_for(new_id, rec.label, out_raster))
    expanded = DatasetManifest(records=tuple(records))
    stamped, _report = apply_exclusions(expanded, ExclusionLedger(entries=()))
    split = stratified_holdout(stamped, SplitSpec(0.7, 0.15, 0.15, seed=split_seed))
    corpus_like = SyntheticCorpus(manifest=stamped, store=store)
    return _evaluate_arm("flawed", stamped, split, _labels_of(corpus), corpus_like.loader)


def run_sound(
    corpus: SyntheticCorpus, plan: AugmentPlan, split_seed: int, work_dir: Path
) -> ArmResult:
    """Split first, then augment the train partition through the guarded API."""
    split = stratified_holdout(corpus.manifest, SplitSpec(0.7, 0.15, 0.15, seed=split_seed))
    result = augment_training_set(
        corpus.manifest, split, plan, work_dir, loader=corpus.loader
    )

    def loader(path: str) -> np.ndarray:
        if path.startswith(MEM_PREFIX):
            return corpus.loader(path)
        return images.load_rgb(path)

    return _evaluate_arm(
        "sound", result.manifest, result.split, _labels_of(corpus), loader
    )


def _labels_of(corpus: SyntheticCorpus) -> tuple[str, ...]:
    return tuple(corpus.manifest.labels_in_order())


@dataclass(frozen=True)
class ProtocolRun:
    seed: int
    flawed: ArmResult
    sound: ArmResult

    @property
    def delta(self) -> float:
        return self.flawed.accuracy - self.sound.accuracy

    def to_json_obj(self) -> dict:
        return {
            "seed": self.seed,
            "delta": self.delta,
            "flawed": self.flawed.to_json_obj(),
            "sound": self.sound.to_json_obj(),
        }


def run_protocols(
    spec: SyntheticSpec, plan: AugmentPlan | None = None, work_dir: str | Path | None = None
) -> ProtocolRun:
    """Both arms on one corpus, paired: same images, same plan, same seed."""
    corpus = generate_corpus(spec)
    plan = plan if plan is not None else default_plan(spec.seed)
    if work_dir is None:
        with tempfile.TemporaryDirectory(prefix="rigorbench-sim-") as tmp:
            sound = run_sound(corpus, plan, spec.seed, Path(tmp))
    else:
        sound = run_sound(corpus, plan, spec.seed, Path(work_dir))
    flawed = run_flawed(corpus, plan, spec.seed)
    return ProtocolRun(seed=spec.seed, flawed=flawed, sound=sound)


def sign_test_p(deltas: list[float]) -> float:
    """Two-tailed sign test on paired differences, zeros dropped."""
    wins = sum(1 for d in deltas if d > 0)
    losses = sum(1 for d in deltas if d < 0)
    n = wins + losses
    if n == 0:
        return 1.0
    k = min(wins, losses)
    tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0**n
    return min(1.0, 2.0 * tail)


@dataclass(frozen=True)
class SimulationSummary:
    spec: SyntheticSpec
    runs: tuple[ProtocolRun, ...]
    mean_delta: float
    std_delta: float
    sign_p: float
    mean_flawed_leak_rate: float
    mean_sound_leak_rate: float

    def to_json_obj(self) -> dict:
        return {
            "n_seeds": len(self.runs),
            "mean_delta": self.mean_delta,
            "std_delta": self.std_delta,
            "sign_test_p": self.sign_p,
            "mean_flawed_accuracy": float(
                np.mean([r.flawed.accuracy for r in self.runs])
            ),
            "mean_sound_accuracy": float(np.mean([r.sound.accuracy for r in self.runs])),
            "mean_flawed_leak_rate": self.mean_flawed_leak_rate,
            "mean_sound_leak_rate": self.mean_sound_leak_rate,
            "runs": [r.to_json_obj() for r in self.runs],
        }


def compare_protocols(
    spec: SyntheticSpec, n_seeds: int = 20, work_dir: str | Path | None = None
) -> SimulationSummary:
    """Repeat the paired comparison across seeds and test the direction.

    Each seed regenerates the corpus, so the summary speaks to the protocol
    difference rather than to one lucky draw of blobs.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    runs = []
    for i in range(n_seeds):
        seed_spec = SyntheticSpec(
            n_classes=spec.n_classes,
            per_class=spec.per_class,
            image_size=spec.image_size,
            noise=spec.noise,
            seed=spec.seed + i,
        )
        runs.append(run_protocols(seed_spec, work_dir=work_dir))
    deltas = [r.delta for r in runs]
    std = float(np.std(deltas, ddof=1)) if len(deltas) > 1 else 0.0
    return SimulationSummary(
        spec=spec,
        runs=tuple(runs),
        mean_delta=float(np.mean(deltas)),
        std_delta=std,
        sign_p=sign_test_p(deltas),
        mean_flawed_leak_rate=float(np.mean([r.flawed.leakage.rate for r in runs])),
        mean_sound_leak_rate=float(np.mean([r.sound.leakage.rate for r in runs])),
    )
