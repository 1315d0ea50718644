"""Shared test fixtures: synthetic images and small corpora on disk."""

import numpy as np
import pytest

from rigorbench import audit, images
from rigorbench.manifest import DatasetManifest, ImageRecord


def synth_image(seed: int, size: int = 32, kind: str = "blob") -> np.ndarray:
    """Deterministic small test raster: noisy background with a bright blob."""
    rng = np.random.default_rng(seed)
    img = rng.integers(90, 166, size=(size, size, 3)).astype(np.uint8)
    if kind == "blob":
        yy, xx = np.mgrid[0:size, 0:size]
        cy, cx = rng.integers(size // 4, 3 * size // 4, size=2)
        r = size // 5
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        img[mask] = np.clip(img[mask].astype(int) + 70, 0, 255).astype(np.uint8)
    return img


def record_for(rid: str, label: str, raster: np.ndarray, path: str = "") -> ImageRecord:
    from rigorbench import hashing

    png = images.encode_png_bytes(raster)
    return ImageRecord(
        id=rid,
        path=path or f"mem://{rid}",
        label=label,
        byte_hash=hashing.compute_byte_hash(png),
        phash=hashing.compute_phash(raster),
        width=raster.shape[1],
        height=raster.shape[0],
    )


def write_corpus(root, spec: dict[str, int], size: int = 32, seed: int = 0):
    """Write spec[label] images per label under root/<label>/ and return paths."""
    paths = {}
    counter = seed
    for label, count in sorted(spec.items()):
        for i in range(count):
            p = root / label / f"img_{i:03d}.png"
            images.save_png(p, synth_image(counter, size=size))
            paths[f"{label}/img_{i:03d}.png"] = p
            counter += 1
    return paths


def stamped(manifest: DatasetManifest) -> DatasetManifest:
    """Run a manifest through cleaning with an empty ledger to stamp it."""
    cleaned, _ = audit.apply_exclusions(manifest, audit.ExclusionLedger(entries=()))
    return cleaned


@pytest.fixture
def tiny_corpus(tmp_path):
    root = tmp_path / "corpus"
    paths = write_corpus(root, {"melanoma": 6, "nevus": 8, "keratosis": 5})
    return root, paths
