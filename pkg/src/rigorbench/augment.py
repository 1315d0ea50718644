"""Training-set augmentation with per-image deterministic parameter streams.

An augmentation plan lists ops with parameter distributions; applying it to
a training partition produces new records whose ids carry an aug: prefix
and a provenance document recording exactly which parameters each copy
drew. Parameter streams are seeded per source image (plan seed mixed with
the source id), so adding or removing images never shifts the draws of the
others. There is deliberately no way to point this module at an evaluation
partition.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import hashing, images
from .errors import RefusesEvalAugmentation, SchemaError
from .manifest import DatasetManifest, ImageRecord
from .rng import SplitMixRng, mix64
from .splits import SplitManifest

AUGMENT_SCHEMA = "rigorbench_augment_v1"

OP_KINDS = ("flip_h", "flip_v", "rotate", "zoom", "shift", "brightness", "contrast")

AUG_ID_PREFIX = "aug:"


@dataclass(frozen=True)
class OpSpec:
    """One op plus its parameter distribution, as declared in the plan.

    Parameter values may be a number (fixed), {"range": [lo, hi]} for a
    uniform draw, or {"choices": [...]} for a uniform pick. Flip ops take a
    "prob" instead.
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise SchemaError(f"unknown op kind {self.kind!r}, known: {OP_KINDS}")
        checker = _VALIDATORS[self.kind]
        checker(self.kind, self.params)


def _check_prob(kind, params):
    prob = params.get("prob", 1.0)
    if not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
        raise SchemaError(f"{kind}: prob must be in [0, 1], got {prob!r}")


def _param_bounds(spec):
    """Possible value range of a parameter spec, for validation."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec), float(spec)
    if isinstance(spec, dict) and set(spec) == {"range"}:
        lo, hi = spec["range"]
        if not lo <= hi:
            raise SchemaError(f"range [{lo}, {hi}] is inverted")
        return float(lo), float(hi)
    if isinstance(spec, dict) and set(spec) == {"choices"}:
        choices = spec["choices"]
        if not choices:
            raise SchemaError("choices must be non-empty")
        vals = [float(c) for c in choices]
        return min(vals), max(vals)
    raise SchemaError(f"bad parameter spec {spec!r}")


def _check_rotate(kind, params):
    if "degrees" not in params:
        raise SchemaError("rotate needs a degrees parameter")
    _param_bounds(params["degrees"])


def _check_zoom(kind, params):
    if "factor" not in params:
        raise SchemaError("zoom needs a factor parameter")
    lo, _ = _param_bounds(params["factor"])
    if lo <= 0:
        raise SchemaError(f"zoom factor must be positive, got minimum {lo}")


def _check_shift(kind, params):
    for axis in ("dx", "dy"):
        if axis not in params:
            raise SchemaError(f"shift needs a {axis} parameter")
        lo, hi = _param_bounds(params[axis])
        if lo < -0.5 or hi > 0.5:
            raise SchemaError(f"shift {axis} must stay within [-0.5, 0.5]")


def _check_factor(kind, params):
    if "factor" not in params:
        raise SchemaError(f"{kind} needs a factor parameter")
    lo, _ = _param_bounds(params["factor"])
    if lo <= 0:
        raise SchemaError(f"{kind} factor must be positive, got minimum {lo}")


_VALIDATORS = {
    "flip_h": _check_prob,
    "flip_v": _check_prob,
    "rotate": _check_rotate,
    "zoom": _check_zoom,
    "shift": _check_shift,
    "brightness": _check_factor,
    "contrast": _check_factor,
}


@dataclass(frozen=True)
class AugmentPlan:
    seed: int
    copies_per_image: int
    ops: tuple[OpSpec, ...]

    def __post_init__(self):
        if self.copies_per_image < 1:
            raise SchemaError(f"copies_per_image must be >= 1, got {self.copies_per_image}")
        if not self.ops:
            raise SchemaError("plan needs at least one op")

    def to_json_obj(self) -> dict:
        return {
            "schema": AUGMENT_SCHEMA,
            "kind": "plan",
            "seed": self.seed,
            "copies_per_image": self.copies_per_image,
            "ops": [{"kind": op.kind, **op.params} for op in self.ops],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def plan_from_json_obj(obj) -> AugmentPlan:
    if not isinstance(obj, dict) or obj.get("schema") != AUGMENT_SCHEMA:
        raise SchemaError(f"augmentation plan must declare schema {AUGMENT_SCHEMA}", "schema")
    partitions = obj.get("partitions")
    if partitions is not None and set(partitions) != {"train"}:
        raise RefusesEvalAugmentation(
            f"augmentation may only target the train partition, plan asks for {partitions}"
        )
    ops_raw = obj.get("ops")
    if not isinstance(ops_raw, list) or not ops_raw:
        raise SchemaError("plan needs a non-empty ops list", "ops")
    ops = []
    for i, raw in enumerate(ops_raw):
        if not isinstance(raw, dict) or "kind" not in raw:
            raise SchemaError("op needs a kind", f"ops[{i}]")
        params = {k: v for k, v in raw.items() if k != "kind"}
        try:
            ops.append(OpSpec(kind=raw["kind"], params=params))
        except SchemaError as exc:
            raise SchemaError(str(exc), f"ops[{i}]") from exc
    try:
        return AugmentPlan(
            seed=int(obj["seed"]),
            copies_per_image=int(obj.get("copies_per_image", 1)),
            ops=tuple(ops),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad plan: {exc}") from exc


def read_plan(path: str | Path) -> AugmentPlan:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"plan is not valid JSON: {exc}") from exc
    return plan_from_json_obj(obj)


def _draw(spec, rng: SplitMixRng) -> float:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return float(spec)
    if "range" in spec:
        lo, hi = spec["range"]
        return rng.uniform(float(lo), float(hi))
    return float(rng.choice(list(spec["choices"])))


def resolve_ops(plan_ops: tuple[OpSpec, ...], rng: SplitMixRng) -> list[dict]:
    """Draw concrete parameters for every op, in plan order.

    Every op consumes its draws even when a flip resolves to not applied,
    so the stream position after resolving is independent of outcomes.
    """
    resolved = []
    for op in plan_ops:
        if op.kind in ("flip_h", "flip_v"):
            prob = float(op.params.get("prob", 1.0))
            applied = rng.uniform(0.0, 1.0) < prob
            resolved.append({"kind": op.kind, "applied": applied})
        elif op.kind == "rotate":
            resolved.append({"kind": "rotate", "degrees": _draw(op.params["degrees"], rng)})
        elif op.kind == "zoom":
            resolved.append({"kind": "zoom", "factor": _draw(op.params["factor"], rng)})
        elif op.kind == "shift":
            resolved.append(
                {
                    "kind": "shift",
                    "dx": _draw(op.params["dx"], rng),
                    "dy": _draw(op.params["dy"], rng),
                }
            )
        else:  # brightness | contrast
            resolved.append({"kind": op.kind, "factor": _draw(op.params["factor"], rng)})
    return resolved


def _affine_sample(image: np.ndarray, matrix, offset) -> np.ndarray:
    """Inverse-map affine warp with bilinear sampling and edge clamping.

    For each destination pixel, src = matrix @ (dst - center) + center +
    offset; coordinates outside the raster clamp to the border pixel.
    """
    h, w = image.shape[:2]
    (a, b), (c, d) = matrix
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    ys, xs = np.mgrid[0:h, 0:w]
    dx = xs - cx
    dy = ys - cy
    src_x = np.clip(a * dx + b * dy + cx + offset[0], 0.0, w - 1.0)
    src_y = np.clip(c * dx + d * dy + cy + offset[1], 0.0, h - 1.0)
    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = src_x - x0
    fy = src_y - y0
    img = image.astype(np.float64)
    out = np.empty_like(img)
    for ch in range(img.shape[2]):
        plane = img[:, :, ch]
        top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
        bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
        out[:, :, ch] = top * (1.0 - fy) + bot * fy
    return images.round_half_up_u8(out)


def apply_resolved(image: np.ndarray, resolved: dict) -> np.ndarray:
    """Apply one resolved op to an HxWx3 uint8 raster."""
    kind = resolved["kind"]
    if kind == "flip_h":
        return np.ascontiguousarray(image[:, ::-1]) if resolved["applied"] else image
    if kind == "flip_v":
        return np.ascontiguousarray(image[::-1, :]) if resolved["applied"] else image
    if kind == "rotate":
        # positive degrees turn the displayed content counterclockwise;
        # quarter turns land exactly on the lossless grid permutation
        theta = math.radians(resolved["degrees"])
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        return _affine_sample(image, ((cos_t, -sin_t), (sin_t, cos_t)), (0.0, 0.0))
    if kind == "zoom":
        inv = 1.0 / resolved["factor"]
        return _affine_sample(image, ((inv, 0.0), (0.0, inv)), (0.0, 0.0))
    if kind == "shift":
        h, w = image.shape[:2]
        return _affine_sample(
            image, ((1.0, 0.0), (0.0, 1.0)),
            (-resolved["dx"] * w, -resolved["dy"] * h),
        )
    if kind == "brightness":
        return images.round_half_up_u8(image.astype(np.float64) * resolved["factor"])
    if kind == "contrast":
        img = image.astype(np.float64)
        luma = img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114
        mean = float(luma.mean())
        return images.round_half_up_u8(mean + (img - mean) * resolved["factor"])
    raise SchemaError(f"unknown resolved op {kind!r}")


def generate_copies(
    source_id: str, image: np.ndarray, plan: AugmentPlan
) -> list[tuple[int, list[dict], np.ndarray]]:
    """All augmented copies of one image: (copy index, resolved ops, raster).

    One parameter stream per source image, seeded from (plan.seed, id);
    copies consume it sequentially.
    """
    rng = SplitMixRng(mix64(plan.seed, f"augment/{source_id}"))
    out = []
    for copy_index in range(plan.copies_per_image):
        resolved = resolve_ops(plan.ops, rng)
        raster = image
        for op in resolved:
            raster = apply_resolved(raster, op)
        out.append((copy_index, resolved, raster))
    return out


def aug_id(source_id: str, copy_index: int) -> str:
    return f"{AUG_ID_PREFIX}{source_id}:{copy_index}"


@dataclass(frozen=True)
class AugmentResult:
    """Augmented manifest, updated split, and the provenance document."""

    manifest: DatasetManifest
    split: SplitManifest
    provenance: dict


def augment_training_set(
    manifest: DatasetManifest,
    split: SplitManifest,
    plan: AugmentPlan,
    out_dir: str | Path,
    loader=None,
) -> AugmentResult:
    """Augment exactly the train partition of a split corpus.

    Each augmented copy is written to out_dir as PNG, appended to the
    manifest (hashes computed from the augmented raster), and assigned to
    train in the returned split. The provenance document records the plan
    and the resolved parameters of every copy. Evaluation partitions are
    not reachable from this API by construction.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    load = loader if loader is not None else images.load_rgb
    by_id = manifest.by_id()
    train_ids = sorted(
        rid for rid, part in split.assignment.items() if part == "train" and rid in by_id
    )
    new_records: list[ImageRecord] = []
    prov_records = []
    assignment = dict(split.assignment)
    for rid in train_ids:
        rec = by_id[rid]
        raster = load(rec.path)
        for copy_index, resolved, out_raster in generate_copies(rid, raster, plan):
            new_id = aug_id(rid, copy_index)
            file_name = new_id.replace("/", "_").replace(":", "_") + ".png"
            out_path = out_dir / file_name
            png = images.encode_png_bytes(out_raster)
            out_path.write_bytes(png)
            new_records.append(
                ImageRecord(
                    id=new_id,
                    path=str(out_path),
                    label=rec.label,
                    byte_hash=hashing.compute_byte_hash(png),
                    phash=hashing.compute_phash(out_raster),
                    width=out_raster.shape[1],
                    height=out_raster.shape[0],
                )
            )
            prov_records.append(
                {"id": new_id, "source_id": rid, "ops": resolved, "path": str(out_path)}
            )
            assignment[new_id] = "train"
    augmented_manifest = DatasetManifest(
        records=manifest.records + tuple(new_records),
        stamp=manifest.stamp,
        excluded_ids=manifest.excluded_ids,
    )
    augmented_split = SplitManifest(
        seed=split.seed,
        proportions=split.proportions,
        assignment=assignment,
        class_table=split.class_table,
        manifest_stamp=split.manifest_stamp,
    )
    provenance = {
        "schema": AUGMENT_SCHEMA,
        "kind": "provenance",
        "plan": plan.to_json_obj(),
        "records": prov_records,
    }
    return AugmentResult(
        manifest=augmented_manifest, split=augmented_split, provenance=provenance
    )
