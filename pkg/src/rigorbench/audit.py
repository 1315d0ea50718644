"""Corpus auditing: hashing, duplicate detection, and exclusion cleaning.

The audit walks an image directory into a manifest, finds exact duplicates
(equal file bytes) and near duplicates (perceptual hash within a Hamming
threshold), and applies an exclusion ledger to produce a cleaned manifest
stamped with the hash of its cleaning report.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hashing, images
from .errors import SchemaError, UndecodableImage, UnknownId
from .manifest import DatasetManifest, ImageRecord

DEFAULT_NEAR_THRESHOLD = 8

EXCLUSION_REASONS = ("duplicate", "noise", "quality", "manual")

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}

LEDGER_SCHEMA = "rigorbench_manifest_v1"


def hash_corpus(
    corpus_dir: str | Path,
    labels: str = "dir",
    workers: int = 8,
) -> tuple[DatasetManifest, list[str]]:
    """Walk corpus_dir and hash every image into manifest records.

    labels: "dir" takes each image's immediate parent directory name as its
    class label; "fixed:<name>" assigns one label to everything. Ids are
    POSIX relative paths, records are ordered by id, and hashing runs on a
    thread pool with results merged back in id order so the output is
    independent of scheduling.

    Returns (manifest, undecodable_ids). Files that fail to decode are
    reported, not silently dropped into the manifest.
    """
    corpus_dir = Path(corpus_dir)
    paths = sorted(
        p for p in corpus_dir.rglob("*") if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
    )
    if labels == "dir":
        def label_of(p: Path) -> str:
            return p.parent.name if p.parent != corpus_dir else "unlabeled"
    elif labels.startswith("fixed:") and len(labels) > 6:
        fixed = labels[6:]

        def label_of(p: Path) -> str:
            return fixed
    else:
        raise SchemaError(f"unknown label mode {labels!r}")

    def hash_one(path: Path):
        rel = path.relative_to(corpus_dir).as_posix()
        data = path.read_bytes()
        byte_hash = hashing.compute_byte_hash(data)
        try:
            raster = images.load_rgb(path)
        except UndecodableImage:
            return rel, None
        return rel, ImageRecord(
            id=rel,
            path=str(path),
            label=label_of(path),
            byte_hash=byte_hash,
            phash=hashing.compute_phash(raster),
            width=raster.shape[1],
            height=raster.shape[0],
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(hash_one, paths))
    records = [rec for _, rec in results if rec is not None]
    undecodable = [rel for rel, rec in results if rec is None]
    return DatasetManifest(records=tuple(records)), undecodable


@dataclass(frozen=True)
class DuplicateGroup:
    """A set of mutually duplicate images.

    kind is "exact" (identical bytes) or "near" (perceptual hashes within
    the scan threshold but bytes differ). max_hamming is 0 for exact groups.
    """

    kind: str
    member_ids: tuple[str, ...]
    max_hamming: int


def find_duplicates(
    records, near_threshold: int = DEFAULT_NEAR_THRESHOLD, method: str = "auto"
) -> list[DuplicateGroup]:
    """Exact groups by byte hash, near groups as connected components.

    Near components are built from the pair graph of records whose
    perceptual hashes are within near_threshold but whose bytes differ;
    exact duplicates never reappear as near pairs. Groups and their members
    are sorted by id, exact groups first.
    """
    records = list(records)
    by_bytes: dict[str, list[str]] = {}
    for rec in records:
        by_bytes.setdefault(rec.byte_hash, []).append(rec.id)
    exact = [
        DuplicateGroup(kind="exact", member_ids=tuple(sorted(ids)), max_hamming=0)
        for ids in by_bytes.values()
        if len(ids) > 1
    ]
    exact.sort(key=lambda g: g.member_ids)

    hashed = [rec for rec in records if rec.phash is not None]
    hashes = np.array([rec.phash for rec in hashed], dtype=np.uint64)
    parent = list(range(len(hashed)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    edge_dist: dict[tuple[int, int], int] = {}
    for i, j, d in hashing.self_pairs_within(hashes, near_threshold, method=method):
        if hashed[i].byte_hash == hashed[j].byte_hash:
            continue
        edge_dist[(i, j)] = d
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    components: dict[int, list[int]] = {}
    for (i, j) in edge_dist:
        components.setdefault(find(i), []).extend((i, j))
    near = []
    for root, members in components.items():
        idx = sorted(set(members))
        max_d = max(d for (i, j), d in edge_dist.items() if find(i) == root)
        near.append(
            DuplicateGroup(
                kind="near",
                member_ids=tuple(sorted(hashed[i].id for i in idx)),
                max_hamming=max_d,
            )
        )
    near.sort(key=lambda g: g.member_ids)
    return exact + near


@dataclass(frozen=True)
class ExclusionEntry:
    id: str
    reason: str
    note: str = ""

    def __post_init__(self):
        if self.reason not in EXCLUSION_REASONS:
            raise SchemaError(
                f"exclusion reason {self.reason!r} not in {EXCLUSION_REASONS}"
            )


@dataclass(frozen=True)
class ExclusionLedger:
    """Reviewed list of ids to drop from a corpus, with reasons."""

    entries: tuple[ExclusionEntry, ...]

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.id in seen:
                raise SchemaError(f"ledger lists id {entry.id!r} twice")
            seen.add(entry.id)

    def to_json_obj(self) -> dict:
        return {
            "schema": LEDGER_SCHEMA,
            "kind": "exclusion_ledger",
            "entries": [
                {"id": e.id, "reason": e.reason, "note": e.note} for e in self.entries
            ],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.to_json_obj()), encoding="utf-8")


def ledger_from_json_obj(obj: dict) -> ExclusionLedger:
    if not isinstance(obj, dict) or obj.get("schema") != LEDGER_SCHEMA:
        raise SchemaError(f"exclusion ledger must declare schema {LEDGER_SCHEMA}", "schema")
    entries = []
    for i, raw in enumerate(obj.get("entries", [])):
        if not isinstance(raw, dict) or "id" not in raw or "reason" not in raw:
            raise SchemaError("entry needs id and reason", f"entries[{i}]")
        entries.append(
            ExclusionEntry(id=raw["id"], reason=raw["reason"], note=raw.get("note", ""))
        )
    return ExclusionLedger(entries=tuple(entries))


def read_ledger(path: str | Path) -> ExclusionLedger:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"ledger is not valid JSON: {exc}") from exc
    return ledger_from_json_obj(obj)


@dataclass(frozen=True)
class CleaningReport:
    """What apply_exclusions did: counts per reason and resulting sizes.

    source_count is the corpus size at the start of the cleaning lineage
    (records plus everything excluded so far), which keeps the report, and
    therefore the stamp, stable when the same ledger is applied again.
    """

    source_count: int
    final_count: int
    excluded: tuple[ExclusionEntry, ...]
    counts_by_reason: dict[str, int]

    def to_json_obj(self) -> dict:
        return {
            "schema": LEDGER_SCHEMA,
            "kind": "cleaning_report",
            "source_count": self.source_count,
            "final_count": self.final_count,
            "counts_by_reason": dict(sorted(self.counts_by_reason.items())),
            "excluded": [
                {"id": e.id, "reason": e.reason, "note": e.note}
                for e in sorted(self.excluded, key=lambda e: e.id)
            ],
        }

    def stamp(self) -> str:
        return hashing.compute_byte_hash(canonical_json(self.to_json_obj()).encode("utf-8"))

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(canonical_json(self.to_json_obj()), encoding="utf-8")


def canonical_json(obj) -> str:
    """Stable JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def apply_exclusions(
    manifest: DatasetManifest, ledger: ExclusionLedger
) -> tuple[DatasetManifest, CleaningReport]:
    """Remove ledgered ids and stamp the result with its cleaning report.

    Idempotent: ids the manifest has already excluded are counted again but
    change nothing, so applying the same ledger twice gives the same output.
    An id that is neither present nor previously excluded is an error.
    """
    present = {rec.id for rec in manifest.records}
    for entry in ledger.entries:
        if entry.id not in present and entry.id not in manifest.excluded_ids:
            raise UnknownId(f"exclusion ledger references unknown id {entry.id!r}")
    to_drop = {entry.id for entry in ledger.entries}
    kept = tuple(rec for rec in manifest.records if rec.id not in to_drop)
    counts: dict[str, int] = {}
    for entry in ledger.entries:
        counts[entry.reason] = counts.get(entry.reason, 0) + 1
    report = CleaningReport(
        source_count=len(manifest.records) + len(manifest.excluded_ids),
        final_count=len(kept),
        excluded=tuple(ledger.entries),
        counts_by_reason=counts,
    )
    cleaned = DatasetManifest(
        records=kept,
        stamp=report.stamp(),
        excluded_ids=manifest.excluded_ids | to_drop,
    )
    return cleaned, report


def duplicates_to_ledger(groups: list[DuplicateGroup]) -> ExclusionLedger:
    """Ledger that keeps the first member of each duplicate group.

    Members sort by id, the first survives, the rest are excluded with
    reason "duplicate". An id implicated in several groups is listed once.
    """
    excluded: dict[str, ExclusionEntry] = {}
    for group in groups:
        keeper = group.member_ids[0]
        for member in group.member_ids[1:]:
            if member not in excluded:
                excluded[member] = ExclusionEntry(
                    id=member,
                    reason="duplicate",
                    note=f"{group.kind} duplicate of {keeper}",
                )
    return ExclusionLedger(entries=tuple(excluded[k] for k in sorted(excluded)))
