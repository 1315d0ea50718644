"""Per-fold training with early stopping, then artifact export.

Usage:

    python -m sidecar.train --split split.json --config config.json

The split JSON and manifest CSV come from the rigorbench toolkit; the
exports (predictions.csv, attn/*.attn, runlog.json) go back to it. The
trunk is frozen, so its class-token features are computed once and the
per-fold loop trains only the linear head, which keeps the toy
configuration well under CPU time budgets while exercising the same
protocol and export path a full fine-tune would.
"""

import argparse
import json
import math
import os
import sys
import tempfile
import time
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from rigorbench.attention import AttentionTensor, write_attn
from rigorbench.errors import RigorbenchError
from rigorbench.manifest import DatasetManifest, read_manifest
from rigorbench.metrics import evaluate, from_probabilities, predictions_to_csv_text
from rigorbench.protocol import FoldRun, OptimizerConfig, RunLog, check_early_stopping
from rigorbench.rng import mix64
from rigorbench.splits import SplitManifest, read_split, stratified_kfold

from sidecar.config import TrainConfig, load_config, with_overrides
from sidecar.errors import ConfigError, DatasetMissing, DeviceUnavailable, SidecarError
from sidecar.data import load_batch
from sidecar.model import build_model, class_attention_grid

_SEED_MASK = 0x7FFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class ExportPaths:
    predictions: Path
    runlog: Path
    attn_files: tuple[Path, ...]
    chosen_fold: int
    test_macro_f1: float


def _resolve_device(name: str) -> torch.device:
    if name.startswith("cuda") and not torch.cuda.is_available():
        raise DeviceUnavailable(f"device {name!r} requested but CUDA is not available")
    return torch.device(name)


def _atomic_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_attn(path: Path, tensor: AttentionTensor) -> None:
    tmp = path.parent / f".{path.name}.tmp"
    write_attn(tmp, tensor)
    os.replace(str(tmp) + ".json", str(path) + ".json")
    os.replace(tmp, path)


def _stream_seed(seed: int, name: str) -> int:
    return mix64(seed, name) & _SEED_MASK


def _square_image_size(manifest: DatasetManifest, ids: list[str]) -> int:
    by_id = manifest.by_id()
    sizes = {(by_id[i].height, by_id[i].width) for i in ids}
    if len(sizes) != 1:
        raise DatasetMissing(f"images must share one size, found {sorted(sizes)}")
    (h, w), = sizes
    if h != w:
        raise DatasetMissing(f"images must be square, found {h}x{w}")
    return h


def _val_macro_f1(logits: torch.Tensor, ids: list[str], truth: dict[str, str],
                  labels: list[str]) -> float:
    probs = torch.softmax(logits, dim=1)
    records = [
        from_probabilities(
            rid,
            truth[rid],
            {label: float(p) for label, p in zip(labels, row)},
            split_origin="val",
        )
        for rid, row in zip(ids, probs)
    ]
    return evaluate(records, labels).macro_f1


def _train_head(
    feats: dict[str, torch.Tensor],
    truth: dict[str, str],
    train_ids: list[str],
    val_ids: list[str],
    labels: list[str],
    config: TrainConfig,
    fold: int,
) -> tuple[FoldRun, dict]:
    """Train one fold's head on cached trunk features; returns the fold
    record and the best-epoch head weights."""
    started = time.perf_counter()
    dim = next(iter(feats.values())).shape[0]
    label_index = {label: i for i, label in enumerate(labels)}

    torch.manual_seed(_stream_seed(config.seed, f"fold{fold}/head"))
    head = nn.Linear(dim, len(labels))
    optimizer = torch.optim.AdamW(
        head.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )
    x_train = torch.stack([feats[i] for i in train_ids])
    y_train = torch.tensor([label_index[truth[i]] for i in train_ids])
    x_val = torch.stack([feats[i] for i in val_ids])

    steps_per_epoch = math.ceil(len(train_ids) / config.batch_size)
    warmup_steps = math.ceil(config.warmup_fraction * steps_per_epoch * config.max_epochs)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: min(1.0, (step + 1) / warmup_steps) if warmup_steps else 1.0,
    )

    curve: list[float] = []
    best_f1 = -1.0
    best_epoch = 0
    best_state: dict = {}
    since_best = 0
    stop_epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        generator = torch.Generator().manual_seed(
            _stream_seed(config.seed, f"fold{fold}/epoch{epoch}")
        )
        order = torch.randperm(len(train_ids), generator=generator)
        head.train()
        for start in range(0, len(train_ids), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss = nn.functional.cross_entropy(head(x_train[batch]), y_train[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
        head.eval()
        with torch.no_grad():
            score = _val_macro_f1(head(x_val), val_ids, truth, labels)
        curve.append(score)
        stop_epoch = epoch
        if score > best_f1:  # strict: an equal score does not reset patience
            best_f1 = score
            best_epoch = epoch
            best_state = {k: v.clone() for k, v in head.state_dict().items()}
            since_best = 0
        else:
            since_best += 1
            if since_best == config.patience:
                break

    # the exported protocol must replay: same curve, same stopping decision
    assert check_early_stopping(curve, config.patience, config.max_epochs) == (
        stop_epoch, best_epoch,
    )
    run = FoldRun(
        val_scores=tuple(curve),
        stop_epoch=stop_epoch,
        best_epoch=best_epoch,
        wall_clock_seconds=time.perf_counter() - started,
    )
    return run, best_state


def train_and_export(split_path: str | Path, config: TrainConfig) -> ExportPaths:
    """Run the k-fold protocol and write the three export artifacts.

    Reads the split JSON and the manifest CSV named by config.manifest,
    trains one head per fold with early stopping on validation macro F1,
    evaluates the best-validation fold's head on the test partition (that
    choice is recorded in the run log it emits), and exports predictions,
    per-test-image attention grids, and the run log into config.out_dir.
    """
    _resolve_device(config.device)
    torch.set_num_threads(1)  # bit-reproducibility across runs
    if not config.manifest:
        raise ConfigError("config.manifest must name the dataset manifest CSV")
    split: SplitManifest = read_split(split_path)
    manifest = read_manifest(config.manifest)
    by_id = manifest.by_id()
    missing = sorted(set(split.assignment) - set(by_id))
    if missing:
        raise DatasetMissing(f"split names ids absent from the manifest: {missing[:5]}")

    all_ids = sorted(split.assignment)
    truth = {rid: by_id[rid].label for rid in all_ids}
    labels = sorted(set(truth.values()))
    image_size = _square_image_size(manifest, all_ids)
    model = build_model(config.model, len(labels), config.seed, image_size)

    # frozen trunk: one forward pass caches features and attention for all
    # images; "registers forward hooks to extract attention weights"
    captured: list[torch.Tensor] = []
    hook = model.blocks[-1].attn.register_forward_hook(
        lambda module, args, output: captured.append(module.last_attention)
    )
    feats: dict[str, torch.Tensor] = {}
    grids: dict[str, np.ndarray] = {}
    autocast = (
        torch.autocast(device_type="cpu", dtype=torch.bfloat16)
        if config.mixed_precision
        else nullcontext()
    )
    with torch.no_grad():
        for start in range(0, len(all_ids), 64):
            chunk = all_ids[start:start + 64]
            x = load_batch(manifest, chunk)
            with autocast:
                f = model.features(x)
            grid_maps = class_attention_grid(captured[-1].float(), model.grid)
            for i, rid in enumerate(chunk):
                feats[rid] = f[i].float()
                grids[rid] = grid_maps[i].numpy().astype(np.float32)
    hook.remove()

    pool = [(rid, truth[rid]) for rid in all_ids if split.assignment[rid] != "test"]
    plan = stratified_kfold(pool, k=config.k, seed=config.seed)
    pool_ids = {rid for rid, _ in pool}
    fold_runs: list[FoldRun] = []
    states: list[dict] = []
    for fold in range(config.k):
        val_ids = list(plan.fold_members(fold))
        train_ids = sorted(pool_ids - set(val_ids))
        run, state = _train_head(feats, truth, train_ids, val_ids, labels, config, fold)
        fold_runs.append(run)
        states.append(state)

    chosen = max(
        range(config.k),
        key=lambda f: (fold_runs[f].val_scores[fold_runs[f].best_epoch - 1], -f),
    )
    head = nn.Linear(next(iter(feats.values())).shape[0], len(labels))
    head.load_state_dict(states[chosen])
    head.eval()

    test_ids = sorted(rid for rid in all_ids if split.assignment[rid] == "test")
    with torch.no_grad():
        probs = torch.softmax(head(torch.stack([feats[i] for i in test_ids])), dim=1)
    records = [
        from_probabilities(
            rid,
            truth[rid],
            {label: float(p) for label, p in zip(labels, row)},
            split_origin="test",
        )
        for rid, row in zip(test_ids, probs)
    ]
    test_macro_f1 = evaluate(records, labels).macro_f1

    out_dir = Path(config.out_dir)
    attn_dir = out_dir / "attn"
    attn_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = out_dir / "predictions.csv"
    _atomic_text(predictions_path, predictions_to_csv_text(records, labels))

    attn_files = []
    for rid in test_ids[: config.attn_cases]:
        safe = rid.replace("/", "_").replace(":", "_")
        path = attn_dir / f"{safe}.attn"
        _atomic_attn(
            path,
            AttentionTensor(
                data=grids[rid],
                source_image_id=rid,
                layer=f"blocks.{len(model.blocks) - 1}.attn",
            ),
        )
        attn_files.append(path)

    runlog = RunLog(
        seed=config.seed,
        k=config.k,
        max_epochs=config.max_epochs,
        patience=config.patience,
        optimizer=OptimizerConfig(
            name="adamw",
            hyperparameters={
                "learning_rate": config.learning_rate,
                "weight_decay": config.weight_decay,
                "batch_size": float(config.batch_size),
                "warmup_fraction": config.warmup_fraction,
            },
        ),
        folds=tuple(fold_runs),
        results_on="test",
    )
    runlog_path = out_dir / "runlog.json"
    _atomic_text(runlog_path, runlog.to_json_text())

    return ExportPaths(
        predictions=predictions_path,
        runlog=runlog_path,
        attn_files=tuple(attn_files),
        chosen_fold=chosen,
        test_macro_f1=test_macro_f1,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sidecar.train",
        description="train the reference classifier and export toolkit artifacts",
    )
    parser.add_argument("--split", required=True, help="split JSON from the toolkit")
    parser.add_argument("--config", help="train config JSON")
    parser.add_argument("--manifest", help="dataset manifest CSV (overrides config)")
    parser.add_argument("--out", help="export directory (overrides config)")
    parser.add_argument("--seed", type=int, help="seed (overrides config)")
    parser.add_argument("--device", help="compute device (overrides config)")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else TrainConfig()
        config = with_overrides(
            config, manifest=args.manifest, out_dir=args.out,
            seed=args.seed, device=args.device,
        )
        result = train_and_export(args.split, config)
    except (SidecarError, RigorbenchError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(
        json.dumps(
            {
                "seed": config.seed,
                "k": config.k,
                "chosen_fold": result.chosen_fold,
                "test_macro_f1": result.test_macro_f1,
                "predictions": str(result.predictions),
                "runlog": str(result.runlog),
                "attn_files": len(result.attn_files),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
