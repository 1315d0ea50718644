"""Deterministic stratified splitting: holdout partitions and k-fold plans.

Per-class quotas come from largest-remainder apportionment, which keeps each
class's holdout counts within one image of its exact proportional share.
Membership is drawn by an explicit Fisher-Yates shuffle seeded per class, so
results never depend on the Python version or on dict iteration order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import BadK, EmptyClass, ForeignId, SchemaError, UnstampedManifest
from .manifest import DatasetManifest
from .rng import SplitMixRng, mix64

SPLIT_SCHEMA = "rigorbench_split_v1"
FOLD_SCHEMA = "rigorbench_fold_v1"

PART_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitSpec:
    """Holdout proportions and the seed that fixes membership."""

    train: float
    val: float
    test: float
    seed: int

    def __post_init__(self):
        for name, p in zip(PART_NAMES, (self.train, self.val, self.test)):
            if p < 0:
                raise SchemaError(f"{name} proportion must be >= 0, got {p}")
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise SchemaError(f"proportions must sum to 1, got {total}")

    @property
    def proportions(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)


def largest_remainder(n: int, proportions, tie_order=None) -> list[int]:
    """Apportion n items to parts by largest remainder.

    Every part first gets floor(n * p); leftover items go to the parts with
    the largest fractional remainders. Remainder ties break by tie_order
    position (earlier wins), defaulting to given order. Example: n=4 at
    (0.8, 0.1, 0.1) floors to (3, 0, 0) and the last item goes to the second
    part, giving (3, 1, 0).
    """
    exact = [n * p for p in proportions]
    counts = [int(x) for x in exact]
    remainders = [x - c for x, c in zip(exact, counts)]
    leftover = n - sum(counts)
    order = list(range(len(proportions))) if tie_order is None else list(tie_order)
    ranked = sorted(order, key=lambda i: (-remainders[i], order.index(i)))
    for i in ranked[:leftover]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class SplitManifest:
    """A finished holdout assignment: id -> partition plus per-class counts."""

    seed: int
    proportions: tuple[float, float, float]
    assignment: dict[str, str]
    class_table: dict[str, dict[str, int]]
    manifest_stamp: str | None = None

    def part(self, name: str) -> tuple[str, ...]:
        if name not in PART_NAMES:
            raise SchemaError(f"unknown partition {name!r}")
        return tuple(sorted(i for i, p in self.assignment.items() if p == name))

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in PART_NAMES}
        for p in self.assignment.values():
            out[p] += 1
        return out

    def to_json_obj(self) -> dict:
        return {
            "schema": SPLIT_SCHEMA,
            "seed": self.seed,
            "proportions": list(self.proportions),
            "manifest_stamp": self.manifest_stamp,
            "assignment": {k: self.assignment[k] for k in sorted(self.assignment)},
            "class_table": {
                label: dict(sorted(parts.items()))
                for label, parts in sorted(self.class_table.items())
            },
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def split_from_json_obj(obj: dict) -> SplitManifest:
    if not isinstance(obj, dict) or obj.get("schema") != SPLIT_SCHEMA:
        raise SchemaError(f"split must declare schema {SPLIT_SCHEMA}", "schema")
    try:
        proportions = tuple(float(p) for p in obj["proportions"])
        assignment = dict(obj["assignment"])
        seed = int(obj["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad split document: {exc}") from exc
    if len(proportions) != 3:
        raise SchemaError("proportions must have 3 entries", "proportions")
    for rid, part in assignment.items():
        if part not in PART_NAMES:
            raise SchemaError(f"unknown partition {part!r}", f"assignment[{rid}]")
    class_table = {
        str(label): {str(p): int(n) for p, n in parts.items()}
        for label, parts in obj.get("class_table", {}).items()
    }
    return SplitManifest(
        seed=seed,
        proportions=proportions,  # type: ignore[arg-type]
        assignment=assignment,
        class_table=class_table,
        manifest_stamp=obj.get("manifest_stamp"),
    )


def read_split(path: str | Path) -> SplitManifest:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"split is not valid JSON: {exc}") from exc
    return split_from_json_obj(obj)


def stratified_holdout(manifest: DatasetManifest, spec: SplitSpec) -> SplitManifest:
    """Partition a cleaned manifest into train/val/test, stratified by class.

    Refuses manifests that have not been through exclusion cleaning (no
    stamp): splitting an unaudited corpus is how duplicate leakage happens.
    Within each class, ids are sorted, shuffled by a class-seeded generator,
    and dealt to partitions by largest-remainder quota (remainder ties favor
    train, then val, then test).
    """
    if manifest.stamp is None:
        raise UnstampedManifest(
            "manifest has no cleaning stamp; run the audit and apply exclusions first"
        )
    if len(manifest.records) == 0:
        raise EmptyClass("manifest has no records to split")
    by_class: dict[str, list[str]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.label, []).append(rec.id)
    assignment: dict[str, str] = {}
    class_table: dict[str, dict[str, int]] = {}
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        rng = SplitMixRng(mix64(spec.seed, f"holdout/{label}"))
        rng.shuffle(ids)
        quota = largest_remainder(len(ids), spec.proportions)
        class_table[label] = dict(zip(PART_NAMES, quota))
        cursor = 0
        for part, count in zip(PART_NAMES, quota):
            for rid in ids[cursor:cursor + count]:
                assignment[rid] = part
            cursor += count
    return SplitManifest(
        seed=spec.seed,
        proportions=spec.proportions,
        assignment=assignment,
        class_table=class_table,
        manifest_stamp=manifest.stamp,
    )


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation assignment: id -> fold index over the holdout pool."""

    k: int
    seed: int
    assignment: dict[str, int]

    def fold_members(self, fold: int) -> tuple[str, ...]:
        return tuple(sorted(i for i, f in self.assignment.items() if f == fold))

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes

    def to_json_obj(self) -> dict:
        return {
            "schema": FOLD_SCHEMA,
            "k": self.k,
            "seed": self.seed,
            "assignment": {i: self.assignment[i] for i in sorted(self.assignment)},
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def fold_plan_from_json_obj(obj: dict) -> FoldPlan:
    if not isinstance(obj, dict) or obj.get("schema") != FOLD_SCHEMA:
        raise SchemaError(f"fold plan must declare schema {FOLD_SCHEMA}", "schema")
    try:
        k = int(obj["k"])
        plan = FoldPlan(
            k=k, seed=int(obj["seed"]),
            assignment={str(i): int(f) for i, f in obj["assignment"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad fold plan: {exc}") from exc
    for rid, f in plan.assignment.items():
        if not 0 <= f < k:
            raise SchemaError(f"fold index {f} out of range", f"assignment[{rid}]")
    return plan


def read_fold_plan(path: str | Path) -> FoldPlan:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"fold plan is not valid JSON: {exc}") from exc
    return fold_plan_from_json_obj(obj)


def stratified_kfold(pool: list[tuple[str, str]], k: int, seed: int) -> FoldPlan:
    """Assign a labeled pool to k folds, stratified and globally balanced.

    pool is (id, label) pairs, typically the train+val part of a holdout.
    Within each class, shuffled members are dealt one per fold, always to
    the currently least-loaded fold (ties to the lowest index). Per class
    the fold counts differ by at most 1, and because each deal targets the
    global minimum, total fold sizes also differ by at most 1.
    """
    if k < 2:
        raise BadK(f"k must be >= 2, got {k}")
    if not pool:
        raise EmptyClass("empty pool, nothing to fold")
    by_class: dict[str, list[str]] = {}
    for rid, label in pool:
        by_class.setdefault(label, []).append(rid)
    loads = [0] * k
    assignment: dict[str, int] = {}
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        rng = SplitMixRng(mix64(seed, f"fold/{label}"))
        rng.shuffle(ids)
        cursor = 0
        while cursor < len(ids):
            order = sorted(range(k), key=lambda f: (loads[f], f))
            for f in order:
                if cursor >= len(ids):
                    break
                assignment[ids[cursor]] = f
                loads[f] += 1
                cursor += 1
    return FoldPlan(k=k, seed=seed, assignment=assignment)


@dataclass(frozen=True)
class VerificationReport:
    """Result of checking a split against its manifest."""

    disjoint: bool
    exhaustive: bool
    missing_ids: tuple[str, ...]
    counts: dict[str, int]
    max_class_deviation: int
    passed: bool

    def to_json_obj(self) -> dict:
        return {
            "disjoint": self.disjoint,
            "exhaustive": self.exhaustive,
            "missing_ids": list(self.missing_ids),
            "counts": dict(sorted(self.counts.items())),
            "max_class_deviation": self.max_class_deviation,
            "passed": self.passed,
        }


def verify_split(manifest: DatasetManifest, split: SplitManifest) -> VerificationReport:
    """Check disjointness, exhaustiveness, and per-class proportion deviation.

    A split that mentions an id the manifest does not contain is rejected
    outright (ForeignId). Missing manifest ids or overlaps are reported as
    failures. Per-class deviation is measured against largest-remainder
    quotas and must be at most one image per class per partition.
    """
    manifest_ids = set(manifest.ids())
    foreign = sorted(set(split.assignment) - manifest_ids)
    if foreign:
        raise ForeignId(f"split references ids not in manifest: {foreign[:5]}")
    missing = tuple(sorted(manifest_ids - set(split.assignment)))
    # assignment maps each id to exactly one partition, so overlap between
    # partitions is impossible by construction once ids are unique
    disjoint = True
    exhaustive = not missing
    by_class: dict[str, list[str]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.label, []).append(rec.id)
    max_dev = 0
    for label, ids in by_class.items():
        assigned = [split.assignment.get(i) for i in ids]
        quota = dict(zip(PART_NAMES, largest_remainder(len(ids), split.proportions)))
        for part in PART_NAMES:
            got = sum(1 for a in assigned if a == part)
            max_dev = max(max_dev, abs(got - quota[part]))
    passed = disjoint and exhaustive and max_dev <= 1
    return VerificationReport(
        disjoint=disjoint,
        exhaustive=exhaustive,
        missing_ids=missing,
        counts=split.counts(),
        max_class_deviation=max_dev,
        passed=passed,
    )
