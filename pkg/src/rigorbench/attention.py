"""Attention map rendering: binary tensor format, colormap, and triptychs.

The pipeline for one image is fixed: collapse the channel axis by mean,
bilinear-resize the 2-D map to the image size, normalize to [0, 1], then
blend a jet-colored heatmap over the original at a chosen alpha. Every stage
is exposed separately so renders are auditable step by step.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import BadDims, DimMismatch, IdMismatch, SchemaError
from .images import round_half_up_u8
from .metrics import PredictionRecord

ATTN_MAGIC = b"ATTN"
ATTN_VERSION = 1


@dataclass(frozen=True)
class AttentionTensor:
    """A float32 attention map (H, W) or (C, H, W) tied to a source image."""

    data: np.ndarray
    source_image_id: str
    layer: str = ""

    def __post_init__(self):
        if self.data.ndim not in (2, 3):
            raise BadDims(f"attention tensor must be 2-D or 3-D, got {self.data.ndim}-D")


def write_attn(path: str | Path, tensor: AttentionTensor) -> None:
    """Write the binary map plus its JSON sidecar.

    Layout: magic "ATTN", u16 version, u8 ndims, ndims u32 dims, then
    float32 payload, all little endian, row-major. The sidecar (same path
    plus .json) carries the image id and layer tag.
    """
    data = np.ascontiguousarray(tensor.data, dtype="<f4")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(ATTN_MAGIC)
        fh.write(struct.pack("<H", ATTN_VERSION))
        fh.write(struct.pack("<B", data.ndim))
        for dim in data.shape:
            fh.write(struct.pack("<I", dim))
        fh.write(data.tobytes(order="C"))
    sidecar = {"image_id": tensor.source_image_id, "layer": tensor.layer}
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_attn(path: str | Path) -> AttentionTensor:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 7 or raw[:4] != ATTN_MAGIC:
        raise SchemaError(f"{path}: not an attention tensor file")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != ATTN_VERSION:
        raise SchemaError(f"{path}: unsupported version {version}")
    ndims = raw[6]
    if ndims not in (2, 3):
        raise BadDims(f"{path}: ndims must be 2 or 3, got {ndims}")
    header_end = 7 + 4 * ndims
    if len(raw) < header_end:
        raise SchemaError(f"{path}: truncated header")
    shape = struct.unpack_from(f"<{ndims}I", raw, 7)
    expected = int(np.prod(shape)) * 4
    payload = raw[header_end:]
    if len(payload) != expected:
        raise DimMismatch(
            f"{path}: payload is {len(payload)} bytes but dims {shape} need {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    sidecar_path = Path(str(path) + ".json")
    image_id, layer = "", ""
    if sidecar_path.exists():
        meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
        image_id = meta.get("image_id", "")
        layer = meta.get("layer", "")
    return AttentionTensor(data=data.copy(), source_image_id=image_id, layer=layer)


def collapse(tensor: np.ndarray) -> np.ndarray:
    """Mean over the channel axis of a (C, H, W) map; 2-D passes through."""
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3:
        return arr.mean(axis=0)
    raise BadDims(f"cannot collapse a {arr.ndim}-D tensor")


def resize_map(map2d: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    arr = np.asarray(map2d, dtype=np.float64)
    if arr.ndim != 2:
        raise BadDims("resize expects a 2-D map")
    return kernels.bilinear_resize(arr, out_h, out_w)


def normalize01(map2d: np.ndarray) -> tuple[np.ndarray, bool]:
    """Scale to [0, 1] by (v - min) / (max - min).

    A constant map cannot be normalized; it becomes all zeros and the
    returned flag is True so renderers can say so instead of inventing
    structure.
    """
    arr = np.asarray(map2d, dtype=np.float64)
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        return np.zeros_like(arr), True
    return (arr - lo) / (hi - lo), False


def jet(values: np.ndarray) -> np.ndarray:
    """Classic jet colormap on [0, 1] values; returns float RGB in [0, 1].

    Channels are clamped triangle functions: r = clamp(1.5 - |4v - 3|),
    g = clamp(1.5 - |4v - 2|), b = clamp(1.5 - |4v - 1|). v=0 is deep blue,
    v=0.5 green, v=1 deep red.
    """
    v = np.asarray(values, dtype=np.float64)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def overlay(original: np.ndarray, heat01: np.ndarray, alpha: float = 0.6) -> np.ndarray:
    """Blend jet(heat) over the original: (1 - alpha) * image + alpha * heat."""
    img = np.asarray(original, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise BadDims("overlay expects an HxWx3 image")
    if heat01.shape != img.shape[:2]:
        raise DimMismatch(
            f"heat map {heat01.shape} does not match image {img.shape[:2]}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    heat_rgb = jet(heat01) * 255.0
    blended = (1.0 - alpha) * img + alpha * heat_rgb
    return round_half_up_u8(blended)


@dataclass(frozen=True)
class TriptychPaths:
    original: Path
    overlay: Path
    heatmap: Path
    metadata: Path


def render_triptych(
    image: np.ndarray,
    tensor: AttentionTensor,
    prediction: PredictionRecord,
    out_dir: str | Path,
    alpha: float = 0.6,
) -> TriptychPaths:
    """Write original, overlay, and heatmap panels plus a metadata JSON.

    The tensor and prediction must agree on the image id. Files are written
    atomically (temp name, then rename) so a crashed render never leaves a
    half-written panel behind.
    """
    if tensor.source_image_id != prediction.image_id:
        raise IdMismatch(
            f"tensor is for {tensor.source_image_id!r}, "
            f"prediction for {prediction.image_id!r}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    safe_id = prediction.image_id.replace("/", "_").replace(":", "_")

    collapsed = collapse(tensor.data)
    resized = resize_map(collapsed, image.shape[0], image.shape[1])
    heat01, degenerate = normalize01(resized)

    paths = TriptychPaths(
        original=out_dir / f"{safe_id}_original.png",
        overlay=out_dir / f"{safe_id}_overlay.png",
        heatmap=out_dir / f"{safe_id}_heatmap.png",
        metadata=out_dir / f"{safe_id}_meta.json",
    )
    _atomic_png(paths.original, image)
    _atomic_png(paths.overlay, overlay(image, heat01, alpha=alpha))
    _atomic_png(paths.heatmap, round_half_up_u8(jet(heat01) * 255.0))

    true_conf = prediction.probabilities.get(prediction.true_label, 0.0)
    pred_conf = prediction.probabilities.get(prediction.predicted_label, 0.0)
    meta = {
        "image_id": prediction.image_id,
        "layer": tensor.layer,
        "true_label": prediction.true_label,
        "true_confidence": true_conf,
        "predicted_label": prediction.predicted_label,
        "predicted_confidence": pred_conf,
        "correct": prediction.true_label == prediction.predicted_label,
        "degenerate_map": degenerate,
        "alpha": alpha,
    }
    tmp = paths.metadata.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, paths.metadata)
    return paths


def _atomic_png(path: Path, array: np.ndarray) -> None:
    from . import images

    tmp = path.with_suffix(".png.tmp")
    images.save_png(tmp, array)
    os.replace(tmp, path)


@dataclass(frozen=True)
class CaseSelection:
    """Sampled correct and incorrect prediction ids for qualitative review."""

    correct_ids: tuple[str, ...]
    incorrect_ids: tuple[str, ...]
    correct_shortfall: bool
    incorrect_shortfall: bool


def sample_cases(
    predictions: list[PredictionRecord],
    n_correct: int = 10,
    n_incorrect: int = 10,
    seed: int = 0,
) -> CaseSelection:
    """Draw review cases from each stratum without replacement.

    Strata are sorted by image id before the seeded shuffle, so the draw
    does not depend on prediction file order. When a stratum is smaller
    than requested, everything in it is taken and the shortfall flagged.
    """
    from .rng import SplitMixRng, mix64

    correct = sorted(p.image_id for p in predictions if p.true_label == p.predicted_label)
    incorrect = sorted(p.image_id for p in predictions if p.true_label != p.predicted_label)
    rng_c = SplitMixRng(mix64(seed, "cases/correct"))
    rng_i = SplitMixRng(mix64(seed, "cases/incorrect"))
    take_c = rng_c.sample_ids(correct, min(n_correct, len(correct)))
    take_i = rng_i.sample_ids(incorrect, min(n_incorrect, len(incorrect)))
    return CaseSelection(
        correct_ids=tuple(take_c),
        incorrect_ids=tuple(take_i),
        correct_shortfall=len(correct) < n_correct,
        incorrect_shortfall=len(incorrect) < n_incorrect,
    )
