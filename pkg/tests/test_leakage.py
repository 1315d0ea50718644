"""Leakage scan tests with planted duplicates and transformed copies."""

import io

import numpy as np
import pytest
from PIL import Image

from conftest import record_for, synth_image
from rigorbench import images
from rigorbench.errors import MissingHash
from rigorbench.leakage import (
    cross_split_scan,
    leakage_rate,
    transform_invariant_scan,
)
from rigorbench.manifest import DatasetManifest, ImageRecord
from rigorbench.splits import SplitManifest


def make_setup(extra_eval=None, extra_train=None, loader_map=None):
    """Distinct train/val/test corpus plus any planted records."""
    rasters = {}
    records = []
    assignment = {}
    for i in range(6):
        rid = f"train/{i}"
        raster = synth_image(1000 + i, size=40)
        rasters[rid] = raster
        records.append(record_for(rid, "x", raster))
        assignment[rid] = "train"
    for i in range(3):
        rid = f"val/{i}"
        raster = synth_image(2000 + i, size=40)
        rasters[rid] = raster
        records.append(record_for(rid, "x", raster))
        assignment[rid] = "val"
    for i in range(3):
        rid = f"test/{i}"
        raster = synth_image(3000 + i, size=40)
        rasters[rid] = raster
        records.append(record_for(rid, "x", raster))
        assignment[rid] = "test"
    for rid, raster, part in (extra_eval or []):
        rasters[rid] = raster
        records.append(record_for(rid, "x", raster))
        assignment[rid] = part
    for rid, raster in (extra_train or []):
        rasters[rid] = raster
        records.append(record_for(rid, "x", raster))
        assignment[rid] = "train"
    if loader_map is not None:
        loader_map.update({f"mem://{rid}": arr for rid, arr in rasters.items()})
    manifest = DatasetManifest(records=tuple(records))
    split = SplitManifest(
        seed=0, proportions=(0.5, 0.25, 0.25), assignment=assignment, class_table={}
    )
    return manifest, split, rasters


def test_clean_split_has_no_findings():
    manifest, split, rasters = make_setup()
    assert cross_split_scan(manifest, split) == []
    loader = lambda path: rasters[path.removeprefix("mem://")]
    assert transform_invariant_scan(manifest, split, loader=loader) == []
    summary = leakage_rate([], split)
    assert summary.rate == 0.0
    assert summary.findings_count == 0


def test_exact_leak_detected():
    shared = synth_image(42, size=40)
    manifest, split, _ = make_setup(
        extra_train=[("train/leak", shared)],
        extra_eval=[("test/leak", shared.copy(), "test")],
    )
    findings = cross_split_scan(manifest, split)
    assert len(findings) == 1
    f = findings[0]
    assert (f.kind, f.train_id, f.eval_id, f.eval_split, f.hamming) == (
        "exact", "train/leak", "test/leak", "test", 0,
    )


def test_near_leak_detected_and_not_double_reported():
    base = synth_image(77, size=48)
    buf = io.BytesIO()
    Image.fromarray(base).save(buf, format="JPEG", quality=90)
    buf.seek(0)
    reencoded = np.asarray(Image.open(buf).convert("RGB"))
    manifest, split, _ = make_setup(
        extra_train=[("train/orig", base)],
        extra_eval=[("val/resave", reencoded, "val")],
    )
    findings = cross_split_scan(manifest, split, near_threshold=8)
    assert [f.kind for f in findings] == ["near"]
    assert findings[0].train_id == "train/orig"
    assert findings[0].eval_id == "val/resave"
    assert 0 <= findings[0].hamming <= 8


def test_transform_leaks_carry_variant_tags():
    base = synth_image(55, size=40)
    cases = {
        "flip_h": images.dihedral(base, True, 0),
        "flip_v": images.dihedral(base, True, 2),
        "rot180": images.dihedral(base, False, 2),
    }
    loader_map = {}
    manifest, split, _ = make_setup(
        extra_train=[("train/orig", base)],
        extra_eval=[(f"test/{tag}", raster, "test") for tag, raster in cases.items()],
        loader_map=loader_map,
    )
    loader = lambda path: loader_map[path]
    findings = transform_invariant_scan(manifest, split, loader=loader)
    tags = {f.eval_id: f.transform for f in findings if f.train_id == "train/orig"}
    # a flip_h copy in eval matches the original when flipped back, and both
    # flips are their own inverses; rot180 likewise
    assert tags["test/flip_h"] == "flip_h"
    assert tags["test/flip_v"] == "flip_v"
    assert tags["test/rot180"] == "rot180"
    assert all(f.hamming == 0 for f in findings if f.train_id == "train/orig")


def test_rot90_copy_matches_under_inverse_rotation():
    base = synth_image(66, size=40)
    loader_map = {}
    manifest, split, _ = make_setup(
        extra_train=[("train/orig", base)],
        extra_eval=[("test/rotated", images.dihedral(base, False, 1), "test")],
        loader_map=loader_map,
    )
    findings = transform_invariant_scan(
        manifest, split, loader=lambda p: loader_map[p]
    )
    ours = [f for f in findings if f.train_id == "train/orig"]
    assert len(ours) == 1
    # rotating the eval copy another 270 degrees restores the original
    assert ours[0].transform == "rot270"


def test_identity_matches_not_reported_by_transform_scan():
    shared = synth_image(88, size=40)
    loader_map = {}
    manifest, split, _ = make_setup(
        extra_train=[("train/same", shared)],
        extra_eval=[("val/same", shared.copy(), "val")],
        loader_map=loader_map,
    )
    findings = transform_invariant_scan(
        manifest, split, loader=lambda p: loader_map[p]
    )
    # the raw duplicate belongs to cross_split_scan; transform findings may
    # only name non-identity variants
    assert all(f.transform != "identity" for f in findings)
    pair_kinds = [
        (f.train_id, f.eval_id) for f in findings if f.train_id == "train/same"
    ]
    assert ("train/same", "val/same") not in pair_kinds or all(
        f.transform is not None for f in findings
    )


def test_symmetric_image_keeps_min_distance_variant():
    # a horizontally symmetric image matches under several variants; the
    # scan must report exactly one finding per pair
    base = synth_image(99, size=40)
    sym = np.concatenate([base[:, :20], base[:, :20][:, ::-1]], axis=1)
    loader_map = {}
    manifest, split, _ = make_setup(
        extra_train=[("train/sym", sym)],
        extra_eval=[("test/symcopy", images.dihedral(sym, True, 0), "test")],
        loader_map=loader_map,
    )
    findings = transform_invariant_scan(
        manifest, split, loader=lambda p: loader_map[p]
    )
    ours = [f for f in findings if (f.train_id, f.eval_id) == ("train/sym", "test/symcopy")]
    assert len(ours) == 1


def test_missing_phash_raises():
    manifest, split, _ = make_setup()
    broken = list(manifest.records)
    rec = broken[0]
    broken[0] = ImageRecord(
        id=rec.id, path=rec.path, label=rec.label, byte_hash=rec.byte_hash,
        phash=None, width=rec.width, height=rec.height,
    )
    with pytest.raises(MissingHash):
        cross_split_scan(DatasetManifest(records=tuple(broken)), split)


def test_leakage_rate_counts_unique_eval_ids():
    manifest, split, _ = make_setup()
    from rigorbench.leakage import LeakFinding

    findings = [
        LeakFinding("exact", "train/0", "val/0", "val", 0),
        LeakFinding("near", "train/1", "val/0", "val", 3),
        LeakFinding("transform", "train/2", "test/1", "test", 0, "flip_h"),
    ]
    summary = leakage_rate(findings, split)
    assert summary.eval_total == 6
    assert summary.implicated_total == 2
    assert summary.rate == pytest.approx(2 / 6)
    assert summary.implicated_by_kind == {"exact": 1, "near": 1, "transform": 1}
    assert summary.findings_count == 3


def test_findings_sorted_and_json_ready():
    shared_a = synth_image(10, size=40)
    shared_b = synth_image(11, size=40)
    manifest, split, _ = make_setup(
        extra_train=[("train/a", shared_a), ("train/b", shared_b)],
        extra_eval=[
            ("val/a", shared_a.copy(), "val"),
            ("test/b", shared_b.copy(), "test"),
        ],
    )
    findings = cross_split_scan(manifest, split)
    keys = [(f.eval_split, f.eval_id, f.train_id) for f in findings]
    assert keys == sorted(keys)
    obj = findings[0].to_json_obj()
    assert set(obj) == {"kind", "train_id", "eval_id", "eval_split", "hamming", "transform"}
