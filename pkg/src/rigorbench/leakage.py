"""Cross-split leakage scans.

Leakage means an evaluation image that the training partition has already
seen: byte-identical files, perceptually near-identical files, or a flipped
or rotated copy. Findings name the (train, eval) pair, the distance, and
for transform findings the square-symmetry variant under which the eval
image matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import hashing, images
from .errors import MissingHash
from .manifest import DatasetManifest
from .splits import SplitManifest

DEFAULT_NEAR_THRESHOLD = 8

# Variant precedence when several transforms tie on distance.
_TRANSFORM_ORDER = {name: i for i, (name, _, _) in enumerate(images.DIHEDRAL_VARIANTS)}


@dataclass(frozen=True)
class LeakFinding:
    """One leaked (train, eval) image pair."""

    kind: str  # "exact" | "near" | "transform"
    train_id: str
    eval_id: str
    eval_split: str  # "val" | "test"
    hamming: int
    transform: str | None = None

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind,
            "train_id": self.train_id,
            "eval_id": self.eval_id,
            "eval_split": self.eval_split,
            "hamming": self.hamming,
            "transform": self.transform,
        }


def _split_records(manifest: DatasetManifest, split: SplitManifest):
    by_id = manifest.by_id()
    train, evals = [], []
    for rid, part in split.assignment.items():
        rec = by_id.get(rid)
        if rec is None:
            continue
        if part == "train":
            train.append(rec)
        else:
            evals.append((rec, part))
    train.sort(key=lambda r: r.id)
    evals.sort(key=lambda e: e[0].id)
    return train, evals


def _require_phashes(records) -> np.ndarray:
    values = []
    for rec in records:
        if rec.phash is None:
            raise MissingHash(f"record {rec.id!r} has no perceptual hash")
        values.append(rec.phash)
    return np.array(values, dtype=np.uint64)


def cross_split_scan(
    manifest: DatasetManifest,
    split: SplitManifest,
    near_threshold: int = DEFAULT_NEAR_THRESHOLD,
    method: str = "auto",
) -> list[LeakFinding]:
    """Find exact and near duplicates between train and each eval partition.

    Exact means equal byte hash; near means perceptual hashes within
    near_threshold on byte-distinct files. Findings sort by
    (eval_split, eval_id, train_id).
    """
    train, evals = _split_records(manifest, split)
    findings: list[LeakFinding] = []

    train_by_bytes: dict[str, list[str]] = {}
    for rec in train:
        train_by_bytes.setdefault(rec.byte_hash, []).append(rec.id)
    for rec, part in evals:
        for train_id in train_by_bytes.get(rec.byte_hash, ()):
            findings.append(
                LeakFinding("exact", train_id, rec.id, part, hamming=0)
            )

    if train and evals:
        train_hashes = _require_phashes(train)
        eval_hashes = _require_phashes([rec for rec, _ in evals])
        for ti, ei, d in hashing.cross_pairs_within(
            train_hashes, eval_hashes, near_threshold, method=method
        ):
            t_rec, (e_rec, part) = train[ti], evals[ei]
            if t_rec.byte_hash == e_rec.byte_hash:
                continue  # already an exact finding
            findings.append(LeakFinding("near", t_rec.id, e_rec.id, part, hamming=int(d)))

    findings.sort(key=lambda f: (f.eval_split, f.eval_id, f.train_id))
    return findings


def transform_invariant_scan(
    manifest: DatasetManifest,
    split: SplitManifest,
    near_threshold: int = DEFAULT_NEAR_THRESHOLD,
    loader: Callable[[str], np.ndarray] | None = None,
    method: str = "auto",
) -> list[LeakFinding]:
    """Find eval images whose flipped or rotated copy is in training.

    Each eval image is rehashed under the 7 non-identity square symmetries
    (4 rotations x optional horizontal flip) and those hashes are scanned
    against the training hashes. The reported transform names the variant
    of the eval image that matched; per pair, the smallest distance wins,
    then a fixed variant precedence. Identity matches are left to
    cross_split_scan so the two scans never double-report.

    loader maps a record path to its raster; defaults to reading the file.
    """
    train, evals = _split_records(manifest, split)
    if not train or not evals:
        return []
    load = loader if loader is not None else images.load_rgb
    train_hashes = _require_phashes(train)

    variant_hashes: list[int] = []
    variant_meta: list[tuple[int, str]] = []  # (eval index, transform tag)
    for idx, (rec, _) in enumerate(evals):
        raster = load(rec.path)
        for name, flipped, turns in images.DIHEDRAL_VARIANTS:
            if name == "identity":
                continue
            variant_hashes.append(
                hashing.compute_phash(images.dihedral(raster, flipped, turns))
            )
            variant_meta.append((idx, name))

    best: dict[tuple[str, str], tuple[int, int, str]] = {}
    pairs = hashing.cross_pairs_within(
        train_hashes, np.array(variant_hashes, dtype=np.uint64), near_threshold, method=method
    )
    for ti, vi, d in pairs:
        eval_idx, tag = variant_meta[vi]
        e_rec, part = evals[eval_idx]
        key = (train[ti].id, e_rec.id)
        candidate = (int(d), _TRANSFORM_ORDER[tag], tag)
        if key not in best or candidate < best[key]:
            best[key] = candidate

    eval_part = {rec.id: part for rec, part in evals}
    findings = [
        LeakFinding(
            "transform", train_id, eval_id, eval_part[eval_id],
            hamming=d, transform=tag,
        )
        for (train_id, eval_id), (d, _, tag) in best.items()
    ]
    findings.sort(key=lambda f: (f.eval_split, f.eval_id, f.train_id))
    return findings


@dataclass(frozen=True)
class LeakageSummary:
    """Fraction of evaluation images implicated in any finding."""

    eval_total: int
    implicated_by_kind: dict[str, int]
    implicated_total: int
    rate: float
    findings_count: int

    def to_json_obj(self) -> dict:
        return {
            "eval_total": self.eval_total,
            "implicated_by_kind": dict(sorted(self.implicated_by_kind.items())),
            "implicated_total": self.implicated_total,
            "rate": self.rate,
            "findings_count": self.findings_count,
        }


def leakage_rate(findings: list[LeakFinding], split: SplitManifest) -> LeakageSummary:
    """Summarize findings as the fraction of eval images that leaked.

    The rate counts unique implicated eval ids over all val+test images, so
    the same image matching many training files still counts once.
    """
    eval_ids = [rid for rid, part in split.assignment.items() if part in ("val", "test")]
    by_kind: dict[str, set[str]] = {}
    implicated: set[str] = set()
    for f in findings:
        by_kind.setdefault(f.kind, set()).add(f.eval_id)
        implicated.add(f.eval_id)
    total = len(eval_ids)
    return LeakageSummary(
        eval_total=total,
        implicated_by_kind={k: len(v) for k, v in by_kind.items()},
        implicated_total=len(implicated),
        rate=(len(implicated) / total) if total else 0.0,
        findings_count=len(findings),
    )
