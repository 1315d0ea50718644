"""Dataset access and the synthetic toy corpus.

The trainer consumes the toolkit's files: a manifest CSV for images and
labels, a split JSON for partition membership. Images load through the
toolkit's decoder so both sides agree on what a readable image is.
"""

from pathlib import Path

import numpy as np
import torch
from PIL import Image

from rigorbench.audit import apply_exclusions, duplicates_to_ledger, find_duplicates, hash_corpus
from rigorbench.errors import UndecodableImage
from rigorbench.images import load_rgb
from rigorbench.manifest import DatasetManifest
from rigorbench.splits import SplitSpec, stratified_holdout

from sidecar.errors import DatasetMissing


def load_batch(manifest: DatasetManifest, ids: list[str]) -> torch.Tensor:
    """Stack the named images as a float tensor in [-1, 1], (n, 3, h, w)."""
    by_id = manifest.by_id()
    arrays = []
    for rid in ids:
        rec = by_id.get(rid)
        if rec is None:
            raise DatasetMissing(f"id {rid!r} is not in the manifest")
        try:
            arrays.append(load_rgb(rec.path))
        except UndecodableImage as exc:
            raise DatasetMissing(str(exc)) from exc
    stacked = np.stack(arrays).astype(np.float32) / 127.5 - 1.0
    return torch.from_numpy(stacked).permute(0, 3, 1, 2).contiguous()


def _toy_raster(label: str, index: int, seed: int, size: int) -> np.ndarray:
    """Bright noisy field, with a dark disc somewhere for the spot class."""
    rng = np.random.default_rng((seed, 0 if label == "plain" else 1, index))
    img = rng.integers(150, 230, size=(size, size), dtype=np.int64)
    if label == "spot":
        y, x = np.mgrid[0:size, 0:size]
        cy, cx = rng.uniform(size * 0.3, size * 0.7, size=2)
        radius = rng.uniform(size * 0.18, size * 0.28)
        mask = (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius
        img = np.where(mask, img - 120, img)
    img = np.clip(img, 0, 255).astype(np.uint8)
    return np.stack([img] * 3, axis=-1)


def make_toy_corpus(
    out_dir: str | Path,
    seed: int = 42,
    per_class: int = 40,
    image_size: int = 32,
) -> tuple[Path, Path]:
    """Write a two-class synthetic corpus plus its manifest and split.

    Returns (manifest_csv_path, split_json_path). The corpus goes through
    the toolkit's own audit pipeline (hash, dedupe, stamp) so the split is
    accepted downstream exactly like a real dataset's would be.
    """
    out_dir = Path(out_dir)
    for label in ("plain", "spot"):
        (out_dir / "images" / label).mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            raster = _toy_raster(label, i, seed, image_size)
            Image.fromarray(raster).save(out_dir / "images" / label / f"{label}_{i:03d}.png")

    manifest, undecodable = hash_corpus(out_dir / "images")
    if undecodable:
        raise DatasetMissing(f"toy corpus produced undecodable files: {undecodable}")
    ledger = duplicates_to_ledger(find_duplicates(manifest.records))
    cleaned, _report = apply_exclusions(manifest, ledger)

    manifest_path = out_dir / "manifest.csv"
    cleaned.write_csv(manifest_path)
    split = stratified_holdout(cleaned, SplitSpec(0.7, 0.15, 0.15, seed=seed))
    split_path = out_dir / "split.json"
    split.write_json(split_path)
    return manifest_path, split_path
