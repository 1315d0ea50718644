"""Early stopping and run-log conformance tests.

The stopping rule is verified 3 ways: hand-picked curves, an exhaustive
simulation oracle over every short score sequence, and planted log defects.
"""

from itertools import product

import pytest

from rigorbench.errors import MalformedLog
from rigorbench.protocol import (
    FoldRun,
    OptimizerConfig,
    RunLog,
    check_early_stopping,
    read_runlog,
    runlog_from_json_obj,
    validate_runlog,
)


def simulate_stopping(scores, patience, max_epochs):
    """Independent step-by-step simulation of the training loop."""
    best_score = None
    best_epoch = 0
    waited = 0
    last_epoch = 0
    for epoch, score in enumerate(scores[:max_epochs], start=1):
        last_epoch = epoch
        if best_score is None or score > best_score:
            best_score = score
            best_epoch = epoch
            waited = 0
        else:
            waited += 1
            if waited >= patience:
                return epoch, best_epoch
    return last_epoch, best_epoch


def test_hand_picked_curves():
    # improves, then flatlines for patience epochs
    assert check_early_stopping([0.5, 0.6, 0.6, 0.6, 0.6], patience=3, max_epochs=15) == (5, 2)
    # strictly improving: runs to the horizon
    assert check_early_stopping([0.1, 0.2, 0.3, 0.4], patience=2, max_epochs=15) == (4, 4)
    # max_epochs truncates before patience fires
    assert check_early_stopping([0.9, 0.8, 0.7, 0.6], patience=10, max_epochs=3) == (3, 1)
    # equal score does not count as improvement
    assert check_early_stopping([0.5, 0.5, 0.5], patience=2, max_epochs=15) == (3, 1)
    # single epoch
    assert check_early_stopping([0.4], patience=3, max_epochs=15) == (1, 1)


def test_exhaustive_against_simulation_oracle():
    # every score sequence of length 6 over 3 levels, every patience 1..3
    levels = (0.1, 0.2, 0.3)
    for scores in product(levels, repeat=6):
        for patience in (1, 2, 3):
            for max_epochs in (4, 6, 15):
                got = check_early_stopping(list(scores), patience, max_epochs)
                want = simulate_stopping(list(scores), patience, max_epochs)
                assert got == want, (scores, patience, max_epochs)


def test_stopping_validation():
    with pytest.raises(MalformedLog):
        check_early_stopping([], 3, 15)
    with pytest.raises(MalformedLog):
        check_early_stopping([0.5], 0, 15)
    with pytest.raises(MalformedLog):
        check_early_stopping([0.5], 3, 0)


def make_log(**overrides):
    scores = (0.5, 0.6, 0.58, 0.59, 0.57)  # stop at 5, best at 2 (patience 3)
    defaults = dict(
        seed=42,
        k=5,
        max_epochs=15,
        patience=3,
        optimizer=OptimizerConfig("adamw", {"lr": 2e-5, "weight_decay": 0.01}),
        folds=tuple(
            FoldRun(val_scores=scores, stop_epoch=5, best_epoch=2) for _ in range(5)
        ),
        results_on="test",
    )
    defaults.update(overrides)
    return RunLog(**defaults)


def test_clean_log_has_no_findings():
    assert validate_runlog(make_log()) == []


def test_early_stop_mismatch_flagged():
    folds = list(make_log().folds)
    folds[2] = FoldRun(val_scores=folds[2].val_scores, stop_epoch=4, best_epoch=2)
    findings = validate_runlog(make_log(folds=tuple(folds)))
    assert [f.code for f in findings] == ["EARLY_STOP_MISMATCH"]
    assert findings[0].fold == 2


def test_best_epoch_mismatch_flagged():
    folds = list(make_log().folds)
    folds[0] = FoldRun(val_scores=folds[0].val_scores, stop_epoch=5, best_epoch=4)
    findings = validate_runlog(make_log(folds=tuple(folds)))
    assert [f.code for f in findings] == ["BEST_EPOCH_MISMATCH"]


def test_curve_overrun_flagged():
    # patience 1: training should stop at epoch 3 but the curve has 5 epochs
    scores = (0.5, 0.6, 0.55, 0.54, 0.53)
    folds = tuple(FoldRun(val_scores=scores, stop_epoch=3, best_epoch=2) for _ in range(5))
    findings = validate_runlog(make_log(patience=1, folds=folds))
    assert {f.code for f in findings} == {"CURVE_OVERRUN"}


def test_missing_seed_and_small_k():
    findings = validate_runlog(make_log(seed=None))
    assert "MISSING_SEED" in {f.code for f in findings}

    one_fold = make_log(k=1, folds=make_log().folds[:1])
    codes = {f.code for f in validate_runlog(one_fold)}
    assert "K_TOO_SMALL" in codes


def test_fold_count_mismatch():
    findings = validate_runlog(make_log(folds=make_log().folds[:3]))
    assert "FOLD_COUNT_MISMATCH" in {f.code for f in findings}


def test_results_on_val_flagged():
    findings = validate_runlog(make_log(results_on="val"))
    assert [f.code for f in findings] == ["RESULTS_ON_VAL"]


def test_runlog_json_round_trip(tmp_path):
    log = make_log()
    path = tmp_path / "run.json"
    log.write_json(path)
    again = read_runlog(path)
    assert again == log
    assert again.to_json_text() == log.to_json_text()


def test_runlog_schema_violations(tmp_path):
    with pytest.raises(MalformedLog):
        runlog_from_json_obj({"schema": "wrong"})
    with pytest.raises(MalformedLog):
        runlog_from_json_obj({"schema": "rigorbench_runlog_v1"})
    obj = make_log().to_json_obj()
    obj["results_on"] = "train"
    with pytest.raises(MalformedLog):
        runlog_from_json_obj(obj)
    obj = make_log().to_json_obj()
    obj["folds"][0]["stop_epoch"] = 99
    with pytest.raises(MalformedLog):
        runlog_from_json_obj(obj)
    path = tmp_path / "bad.json"
    path.write_text("{{{{")
    with pytest.raises(MalformedLog):
        read_runlog(path)
