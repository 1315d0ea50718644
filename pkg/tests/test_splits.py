"""Split engine tests: apportionment, determinism, k-fold balance."""

import pytest

from conftest import record_for, stamped, synth_image
from rigorbench.errors import BadK, EmptyClass, ForeignId, SchemaError, UnstampedManifest
from rigorbench.manifest import DatasetManifest
from rigorbench.splits import (
    FoldPlan,
    SplitManifest,
    SplitSpec,
    largest_remainder,
    read_fold_plan,
    read_split,
    stratified_holdout,
    stratified_kfold,
    verify_split,
)


def build_manifest(class_sizes: dict[str, int]) -> DatasetManifest:
    records = []
    n = 0
    for label, count in sorted(class_sizes.items()):
        for i in range(count):
            records.append(record_for(f"{label}/{i:04d}", label, synth_image(n, 16)))
            n += 1
    return stamped(DatasetManifest(records=tuple(records)))


def test_largest_remainder_worked_example():
    # 4 items at 80/10/10: floors are (3,0,0), remainders (.2,.4,.4),
    # and the tie between the two .4 parts goes to the earlier one
    assert largest_remainder(4, (0.8, 0.1, 0.1)) == [3, 1, 0]


def test_largest_remainder_exact_and_edge_cases():
    assert largest_remainder(10, (0.8, 0.1, 0.1)) == [8, 1, 1]
    assert largest_remainder(0, (0.5, 0.5)) == [0, 0]
    assert largest_remainder(7, (1.0, 0.0, 0.0)) == [7, 0, 0]
    assert sum(largest_remainder(11, (1 / 3, 1 / 3, 1 / 3))) == 11


def test_largest_remainder_never_off_by_more_than_one():
    for n in range(1, 200):
        counts = largest_remainder(n, (0.8, 0.1, 0.1))
        assert sum(counts) == n
        for c, p in zip(counts, (0.8, 0.1, 0.1)):
            assert abs(c - n * p) < 1.0


def test_split_spec_validation():
    with pytest.raises(SchemaError):
        SplitSpec(0.8, 0.1, 0.2, seed=1)
    with pytest.raises(SchemaError):
        SplitSpec(-0.1, 0.6, 0.5, seed=1)
    assert SplitSpec(0.8, 0.1, 0.1, seed=1).proportions == (0.8, 0.1, 0.1)


def test_holdout_refuses_unstamped_manifest():
    records = (record_for("a", "x", synth_image(0, 16)),)
    with pytest.raises(UnstampedManifest):
        stratified_holdout(DatasetManifest(records=records), SplitSpec(0.8, 0.1, 0.1, seed=1))


def test_holdout_refuses_empty_manifest():
    empty = stamped(DatasetManifest(records=()))
    with pytest.raises(EmptyClass):
        stratified_holdout(empty, SplitSpec(0.8, 0.1, 0.1, seed=1))


def test_holdout_is_deterministic_and_seed_sensitive():
    manifest = build_manifest({"a": 40, "b": 25})
    spec = SplitSpec(0.8, 0.1, 0.1, seed=42)
    s1 = stratified_holdout(manifest, spec)
    s2 = stratified_holdout(manifest, spec)
    s3 = stratified_holdout(manifest, SplitSpec(0.8, 0.1, 0.1, seed=43))
    assert s1.assignment == s2.assignment
    assert s1.assignment != s3.assignment
    assert s1.to_json_text() == s2.to_json_text()


def test_holdout_insertion_order_does_not_matter():
    manifest = build_manifest({"a": 12, "b": 9})
    reversed_manifest = stamped(
        DatasetManifest(records=tuple(reversed(manifest.records)))
    )
    spec = SplitSpec(0.6, 0.2, 0.2, seed=7)
    assert (
        stratified_holdout(manifest, spec).assignment
        == stratified_holdout(reversed_manifest, spec).assignment
    )


def test_holdout_class_quotas():
    manifest = build_manifest({"a": 100, "b": 10, "c": 7})
    split = stratified_holdout(manifest, SplitSpec(0.8, 0.1, 0.1, seed=42))
    assert split.class_table["a"] == {"train": 80, "val": 10, "test": 10}
    assert split.class_table["b"] == {"train": 8, "val": 1, "test": 1}
    # 7 * 0.8 = 5.6 -> 5, remainders (.6,.7,.7): val then test get the extras
    assert split.class_table["c"] == {"train": 5, "val": 1, "test": 1}
    report = verify_split(manifest, split)
    assert report.passed
    assert report.max_class_deviation <= 1


def test_holdout_singleton_class_goes_to_train():
    manifest = build_manifest({"a": 10, "solo": 1})
    split = stratified_holdout(manifest, SplitSpec(0.8, 0.1, 0.1, seed=1))
    assert split.class_table["solo"] == {"train": 1, "val": 0, "test": 0}


def test_split_json_round_trip(tmp_path):
    manifest = build_manifest({"a": 20, "b": 12})
    split = stratified_holdout(manifest, SplitSpec(0.8, 0.1, 0.1, seed=5))
    path = tmp_path / "split.json"
    split.write_json(path)
    again = read_split(path)
    assert again == split
    again.write_json(tmp_path / "split2.json")
    assert (tmp_path / "split.json").read_bytes() == (tmp_path / "split2.json").read_bytes()


def test_split_schema_violations(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema": "something_else"}')
    with pytest.raises(SchemaError):
        read_split(path)
    path.write_text("not json")
    with pytest.raises(SchemaError):
        read_split(path)


def test_verify_split_detects_foreign_and_missing():
    manifest = build_manifest({"a": 10})
    split = stratified_holdout(manifest, SplitSpec(0.8, 0.1, 0.1, seed=2))

    foreign = SplitManifest(
        seed=2, proportions=split.proportions,
        assignment={**split.assignment, "ghost": "train"},
        class_table=split.class_table,
    )
    with pytest.raises(ForeignId):
        verify_split(manifest, foreign)

    partial = dict(split.assignment)
    dropped = next(iter(partial))
    del partial[dropped]
    incomplete = SplitManifest(
        seed=2, proportions=split.proportions, assignment=partial,
        class_table=split.class_table,
    )
    report = verify_split(manifest, incomplete)
    assert not report.exhaustive
    assert dropped in report.missing_ids
    assert not report.passed


def test_kfold_validation():
    with pytest.raises(BadK):
        stratified_kfold([("a", "x")], k=1, seed=0)
    with pytest.raises(EmptyClass):
        stratified_kfold([], k=3, seed=0)


def test_kfold_balance_within_one_globally():
    # class sizes chosen so naive per-class round robin would overload fold 0
    pool = []
    for label, count in [("a", 613), ("b", 101), ("c", 87), ("d", 49), ("e", 31)]:
        pool.extend((f"{label}/{i}", label) for i in range(count))
    plan = stratified_kfold(pool, k=5, seed=42)
    sizes = plan.fold_sizes()
    assert sum(sizes) == len(pool)
    assert max(sizes) - min(sizes) <= 1

    # per-class spread is also at most 1
    for label in "abcde":
        per_fold = [0] * 5
        for rid, fold in plan.assignment.items():
            if rid.startswith(f"{label}/"):
                per_fold[fold] += 1
        assert max(per_fold) - min(per_fold) <= 1


def test_kfold_deterministic_and_seed_sensitive():
    pool = [(f"id{i}", "ab"[i % 2]) for i in range(30)]
    p1 = stratified_kfold(pool, k=3, seed=9)
    p2 = stratified_kfold(pool, k=3, seed=9)
    p3 = stratified_kfold(pool, k=3, seed=10)
    assert p1.assignment == p2.assignment
    assert p1.assignment != p3.assignment


def test_kfold_handles_classes_smaller_than_k():
    pool = [("a1", "a"), ("a2", "a"), ("b1", "b")]
    plan = stratified_kfold(pool, k=3, seed=0)
    assert sorted(plan.assignment) == ["a1", "a2", "b1"]
    assert max(plan.fold_sizes()) <= 1


def test_fold_plan_round_trip(tmp_path):
    plan = stratified_kfold([(f"i{i}", "x") for i in range(10)], k=5, seed=3)
    path = tmp_path / "folds.json"
    plan.write_json(path)
    assert read_fold_plan(path) == plan


def test_fold_plan_bad_fold_index(tmp_path):
    plan = FoldPlan(k=2, seed=0, assignment={"a": 0})
    obj = plan.to_json_obj()
    obj["assignment"]["a"] = 7
    path = tmp_path / "folds.json"
    import json

    path.write_text(json.dumps(obj))
    with pytest.raises(SchemaError):
        read_fold_plan(path)
