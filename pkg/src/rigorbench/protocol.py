"""Training-protocol conformance: early stopping arithmetic and run logs.

A run log declares the protocol a training run claims to have followed
(folds, epoch caps, patience, optimizer) and the per-epoch validation
curve each fold actually produced. The checker recomputes where early
stopping must have fired and flags logs whose recorded stopping points or
configuration contradict their own curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MalformedLog

RUNLOG_SCHEMA = "rigorbench_runlog_v1"


def check_early_stopping(
    val_scores: list[float], patience: int, max_epochs: int
) -> tuple[int, int]:
    """Return (stop_epoch, best_epoch), both 1-indexed.

    Improvement is strictly greater than the best seen; an equal score does
    not reset patience. Training stops at the first epoch where the count
    of epochs since the last improvement reaches patience, otherwise it
    runs to max_epochs (or the end of the recorded curve).
    """
    if patience < 1:
        raise MalformedLog(f"patience must be >= 1, got {patience}")
    if max_epochs < 1:
        raise MalformedLog(f"max_epochs must be >= 1, got {max_epochs}")
    if not val_scores:
        raise MalformedLog("validation curve is empty")
    horizon = min(len(val_scores), max_epochs)
    best = val_scores[0]
    best_epoch = 1
    since_best = 0
    for epoch in range(2, horizon + 1):
        score = val_scores[epoch - 1]
        if score > best:
            best = score
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best == patience:
                return epoch, best_epoch
    return horizon, best_epoch


@dataclass(frozen=True)
class OptimizerConfig:
    name: str
    hyperparameters: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class FoldRun:
    val_scores: tuple[float, ...]
    stop_epoch: int
    best_epoch: int
    wall_clock_seconds: float | None = None


@dataclass(frozen=True)
class RunLog:
    """Declared protocol plus per-fold training curves."""

    seed: int | None
    k: int
    max_epochs: int
    patience: int
    optimizer: OptimizerConfig
    folds: tuple[FoldRun, ...]
    results_on: str  # "test" | "val"

    def to_json_obj(self) -> dict:
        return {
            "schema": RUNLOG_SCHEMA,
            "config": {
                "seed": self.seed,
                "k": self.k,
                "max_epochs": self.max_epochs,
                "patience": self.patience,
                "optimizer": {
                    "name": self.optimizer.name,
                    "hyperparameters": dict(sorted(self.optimizer.hyperparameters.items())),
                },
            },
            "results_on": self.results_on,
            "folds": [
                {
                    "val_scores": list(f.val_scores),
                    "stop_epoch": f.stop_epoch,
                    "best_epoch": f.best_epoch,
                    "wall_clock_seconds": f.wall_clock_seconds,
                }
                for f in self.folds
            ],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def runlog_from_json_obj(obj) -> RunLog:
    if not isinstance(obj, dict) or obj.get("schema") != RUNLOG_SCHEMA:
        raise MalformedLog(f"run log must declare schema {RUNLOG_SCHEMA}")
    config = obj.get("config")
    if not isinstance(config, dict):
        raise MalformedLog("run log missing config object")
    opt_raw = config.get("optimizer")
    if not isinstance(opt_raw, dict) or "name" not in opt_raw:
        raise MalformedLog("config.optimizer must be an object with a name")
    folds_raw = obj.get("folds")
    if not isinstance(folds_raw, list) or not folds_raw:
        raise MalformedLog("run log needs a non-empty folds list")
    results_on = obj.get("results_on")
    if results_on not in ("test", "val"):
        raise MalformedLog(f"results_on must be 'test' or 'val', got {results_on!r}")
    folds = []
    for i, raw in enumerate(folds_raw):
        try:
            scores = tuple(float(s) for s in raw["val_scores"])
            fold = FoldRun(
                val_scores=scores,
                stop_epoch=int(raw["stop_epoch"]),
                best_epoch=int(raw["best_epoch"]),
                wall_clock_seconds=(
                    None if raw.get("wall_clock_seconds") is None
                    else float(raw["wall_clock_seconds"])
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLog(f"folds[{i}]: {exc}") from exc
        if not fold.val_scores:
            raise MalformedLog(f"folds[{i}]: empty validation curve")
        if not 1 <= fold.stop_epoch <= len(fold.val_scores):
            raise MalformedLog(
                f"folds[{i}]: stop_epoch {fold.stop_epoch} outside recorded curve"
            )
        folds.append(fold)
    try:
        seed = config.get("seed")
        log = RunLog(
            seed=None if seed is None else int(seed),
            k=int(config["k"]),
            max_epochs=int(config["max_epochs"]),
            patience=int(config["patience"]),
            optimizer=OptimizerConfig(
                name=str(opt_raw["name"]),
                hyperparameters={
                    str(k): float(v)
                    for k, v in (opt_raw.get("hyperparameters") or {}).items()
                },
            ),
            folds=tuple(folds),
            results_on=results_on,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLog(f"config: {exc}") from exc
    if log.max_epochs < 1 or log.patience < 1:
        raise MalformedLog("max_epochs and patience must both be >= 1")
    return log


def read_runlog(path: str | Path) -> RunLog:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedLog(f"run log is not valid JSON: {exc}") from exc
    return runlog_from_json_obj(obj)


@dataclass(frozen=True)
class ProtocolFinding:
    code: str
    message: str
    fold: int | None = None

    def to_json_obj(self) -> dict:
        return {"code": self.code, "message": self.message, "fold": self.fold}


def validate_runlog(log: RunLog) -> list[ProtocolFinding]:
    """Cross-check a run log against its own declared protocol.

    Findings, in fold order then config order:
    - EARLY_STOP_MISMATCH: recorded stop epoch differs from the curve
    - BEST_EPOCH_MISMATCH: recorded best epoch is not the curve's argmax
    - CURVE_OVERRUN: curve extends past the recomputed stopping point
    - MISSING_SEED: no seed recorded, the run is unreproducible
    - K_TOO_SMALL: fewer than 2 folds is not cross-validation
    - FOLD_COUNT_MISMATCH: folds recorded != k declared
    - RESULTS_ON_VAL: results reported on the tuning partition
    """
    findings: list[ProtocolFinding] = []
    for i, fold in enumerate(log.folds):
        expected_stop, expected_best = check_early_stopping(
            list(fold.val_scores), log.patience, log.max_epochs
        )
        if fold.stop_epoch != expected_stop:
            findings.append(
                ProtocolFinding(
                    "EARLY_STOP_MISMATCH",
                    f"recorded stop at epoch {fold.stop_epoch}, "
                    f"curve implies {expected_stop}",
                    fold=i,
                )
            )
        if fold.best_epoch != expected_best:
            findings.append(
                ProtocolFinding(
                    "BEST_EPOCH_MISMATCH",
                    f"recorded best epoch {fold.best_epoch}, "
                    f"curve implies {expected_best}",
                    fold=i,
                )
            )
        if len(fold.val_scores) > expected_stop:
            findings.append(
                ProtocolFinding(
                    "CURVE_OVERRUN",
                    f"curve has {len(fold.val_scores)} epochs but stopping "
                    f"should have ended training at {expected_stop}",
                    fold=i,
                )
            )
    if log.seed is None:
        findings.append(ProtocolFinding("MISSING_SEED", "no seed recorded"))
    if log.k < 2:
        findings.append(
            ProtocolFinding("K_TOO_SMALL", f"k={log.k} is not cross-validation")
        )
    if len(log.folds) != log.k:
        findings.append(
            ProtocolFinding(
                "FOLD_COUNT_MISMATCH",
                f"log declares k={log.k} but records {len(log.folds)} folds",
            )
        )
    if log.results_on == "val":
        findings.append(
            ProtocolFinding(
                "RESULTS_ON_VAL",
                "results are reported on the validation partition used for "
                "model selection; report on a held-out test partition",
            )
        )
    return findings
