"""Dataset manifest model and CSV serialization.

A manifest is the flat table of everything known about a corpus: one row per
image with id, path, label, byte hash, perceptual hash, and pixel size. The
CSV layout is a stable interchange format; serialization is deterministic so
round trips are byte-identical.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import SchemaError
from .hashing import phash_from_hex, phash_to_hex

CSV_HEADER = ("id", "path", "label", "byte_hash", "phash", "width", "height")
_STAMP_PREFIX = "# cleaned: "


@dataclass(frozen=True)
class ImageRecord:
    """One corpus image. phash may be None for records that never decoded."""

    id: str
    path: str
    label: str
    byte_hash: str
    phash: int | None
    width: int
    height: int

    def __post_init__(self):
        if not self.id:
            raise SchemaError("record id must be non-empty")
        if not self.label:
            raise SchemaError(f"record {self.id}: label must be non-empty")


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable record table plus cleaning provenance.

    stamp is the SHA-256 of the cleaning report that produced this manifest;
    unstamped manifests are raw audit output and are refused by the split
    engine. excluded_ids tracks what cleaning removed, which is what makes
    re-applying the same exclusion ledger a no-op rather than an error.
    """

    records: tuple[ImageRecord, ...]
    stamp: str | None = None
    excluded_ids: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.id in seen:
                raise SchemaError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]

    def by_id(self) -> dict[str, ImageRecord]:
        return {rec.id: rec for rec in self.records}

    def labels_in_order(self) -> list[str]:
        """Class labels in first-appearance order."""
        seen: dict[str, None] = {}
        for rec in self.records:
            seen.setdefault(rec.label, None)
        return list(seen)

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.records:
            counts[rec.label] = counts.get(rec.label, 0) + 1
        return counts

    def with_stamp(self, stamp: str, excluded_ids: frozenset[str]) -> "DatasetManifest":
        return replace(self, stamp=stamp, excluded_ids=excluded_ids)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        if self.stamp:
            buf.write(f"{_STAMP_PREFIX}{self.stamp}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.records:
            writer.writerow(
                [
                    rec.id,
                    rec.path,
                    rec.label,
                    rec.byte_hash,
                    "" if rec.phash is None else phash_to_hex(rec.phash),
                    rec.width,
                    rec.height,
                ]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv_text(), encoding="utf-8")


def manifest_from_csv_text(text: str) -> DatasetManifest:
    stamp = None
    if text.startswith(_STAMP_PREFIX):
        line, _, text = text.partition("\n")
        stamp = line[len(_STAMP_PREFIX):].strip()
        if len(stamp) != 64:
            raise SchemaError(f"malformed cleaning stamp {stamp!r}")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise SchemaError(f"manifest header must be {','.join(CSV_HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise SchemaError(f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        rid, path, label, byte_hash, phash_text, width, height = row
        try:
            records.append(
                ImageRecord(
                    id=rid,
                    path=path,
                    label=label,
                    byte_hash=byte_hash,
                    phash=phash_from_hex(phash_text) if phash_text else None,
                    width=int(width),
                    height=int(height),
                )
            )
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
    return DatasetManifest(records=tuple(records), stamp=stamp)


def read_manifest(path: str | Path) -> DatasetManifest:
    return manifest_from_csv_text(Path(path).read_text(encoding="utf-8"))
