"""End-to-end command line coverage: the full pipeline, exit codes, config."""

import json
from pathlib import Path

import numpy as np
import pytest

from rigorbench import images
from rigorbench.attention import AttentionTensor, write_attn
from rigorbench.cli import main, render_text
from rigorbench.metrics import PredictionRecord, evaluate, write_predictions
from rigorbench.simulate import SyntheticSpec, synth_raster


@pytest.fixture()
def corpus(tmp_path):
    root = tmp_path / "corpus"
    spec = SyntheticSpec(per_class=6, seed=11)
    for ci, label in enumerate(spec.labels[:3]):
        d = root / label
        d.mkdir(parents=True)
        for j in range(6):
            images.save_png(d / f"img{j:02d}.png", synth_raster(spec, ci, j))
    # byte-identical twin of shade1/img00 planted in shade0
    images.save_png(root / "shade0" / "twin.png", synth_raster(spec, 1, 0))
    return root


@pytest.fixture()
def out(tmp_path, monkeypatch):
    out_dir = tmp_path / "out"
    monkeypatch.setenv("RIGORBENCH_OUT", str(out_dir))
    return out_dir


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(argv, capsys):
    code, out_text, err = run(argv + ["--json"], capsys)
    return code, (json.loads(out_text) if out_text.strip() else None), err


def test_audit_finds_planted_duplicate(corpus, out, capsys):
    code, data, _ = run_json(["audit", str(corpus), "--seed", "7"], capsys)
    assert code == 0
    assert data["seed"] == 7
    assert data["images"] == 19
    assert data["excluded"] == 1
    assert data["kept"] == 18
    kinds = {g["kind"] for g in data["duplicate_groups"]}
    assert "exact" in kinds
    for key in ("manifest", "exclusions", "cleaning_report", "cleaned_manifest"):
        assert Path(data["artifacts"][key]).exists()
    # the audit run was recorded
    store = out / "runs.jsonl"
    assert store.exists()
    assert "run_id" in data


def test_full_pipeline_split_kfold_leak_augment(corpus, out, capsys):
    code, audit_data, _ = run_json(["audit", str(corpus)], capsys)
    assert code == 0
    cleaned = audit_data["artifacts"]["cleaned_manifest"]

    code, split_data, _ = run_json(["split", "--manifest", cleaned, "--seed", "3"], capsys)
    assert code == 0
    assert split_data["verification"]["passed"] is True
    assert sum(split_data["sizes"].values()) == 18
    split_path = split_data["artifacts"]["split"]

    code, kfold_data, _ = run_json(
        ["kfold", "--manifest", cleaned, "--split", split_path, "--k", "3", "--seed", "3"],
        capsys,
    )
    assert code == 0
    assert sum(kfold_data["fold_sizes"]) == kfold_data["pool_size"]
    assert max(kfold_data["fold_sizes"]) - min(kfold_data["fold_sizes"]) <= 1

    code, leak_data, _ = run_json(
        ["leak-scan", "--manifest", cleaned, "--split", split_path], capsys
    )
    assert code == 0  # cleaned corpus has no cross-split duplicates
    assert leak_data["summary"]["findings_count"] == 0

    plan = out / "plan.json"
    plan.write_text(json.dumps({
        "schema": "rigorbench_augment_v1", "kind": "plan", "seed": 3,
        "copies_per_image": 2, "partitions": ["train"],
        "ops": [{"kind": "rotate", "degrees": {"choices": [0, 90, 180, 270]}},
                {"kind": "flip_h", "prob": 0.5}],
    }))
    code, aug_data, _ = run_json(
        ["augment", "--manifest", cleaned, "--split", split_path, "--plan", str(plan)],
        capsys,
    )
    assert code == 0
    assert aug_data["seed"] == 3  # the plan's seed wins
    assert aug_data["copies_written"] == 2 * aug_data["train_sources"]

    # split-then-augment never leaks into eval
    code, leak2, _ = run_json(
        ["leak-scan", "--manifest", aug_data["artifacts"]["augmented_manifest"],
         "--split", aug_data["artifacts"]["augmented_split"]],
        capsys,
    )
    assert code == 0
    assert leak2["summary"]["findings_count"] == 0


def test_leak_scan_flags_planted_cross_split_duplicate(corpus, out, capsys):
    # split the RAW manifest contents by hand so the twin pair straddles train/test
    code, audit_data, _ = run_json(["audit", str(corpus)], capsys)
    raw = Path(audit_data["artifacts"]["manifest"]).read_text()
    from rigorbench.manifest import manifest_from_csv_text
    from rigorbench.splits import SplitManifest

    manifest = manifest_from_csv_text(raw)
    ids = [r.id for r in manifest.records]
    assignment = {rid: "train" for rid in ids}
    assignment["shade0/twin.png"] = "test"  # its byte-twin shade1/img00.png trains
    split = SplitManifest(
        seed=0, proportions=(0.9, 0.0, 0.1), assignment=assignment,
        class_table={}, manifest_stamp="",
    )
    split_path = out / "hand_split.json"
    split.write_json(split_path)
    manifest_path = out / "raw.csv"
    manifest.write_csv(manifest_path)

    code, data, _ = run_json(
        ["leak-scan", "--manifest", str(manifest_path), "--split", str(split_path)],
        capsys,
    )
    assert code == 1
    kinds = {f["kind"] for f in data["findings"]}
    assert "exact" in kinds


def test_metrics_and_bootstrap(out, capsys):
    labels = ["a", "b"]
    records = []
    for i in range(12):
        true = labels[i % 2]
        pred = true if i != 3 else "a"
        records.append(PredictionRecord(
            image_id=f"c{i}", true_label=true, predicted_label=pred,
            probabilities={"a": 0.8 if pred == "a" else 0.2,
                           "b": 0.2 if pred == "a" else 0.8}))
    preds = out / "preds.csv"
    preds.parent.mkdir(parents=True, exist_ok=True)
    write_predictions(preds, records, labels)
    code, data, _ = run_json(
        ["metrics", "--predictions", str(preds), "--bootstrap", "25", "--seed", "5"],
        capsys,
    )
    assert code == 0
    assert data["n_predictions"] == 12
    assert data["accuracy"] == pytest.approx(11 / 12)
    low, high = data["bootstrap"]["ci95"]
    assert low <= data["macro_f1"] <= high
    assert Path(data["artifacts"]["report"]).exists()


def test_stats_correlates_named_columns(out, capsys, tmp_path):
    data_csv = tmp_path / "pairs.csv"
    data_csv.write_text("quality,f1\n1,2\n2,4\n3,6\n4,8\n")
    code, data, _ = run_json(["stats", "--data", str(data_csv)], capsys)
    assert code == 0
    assert data["coefficient"] == pytest.approx(1.0)
    assert data["x"] == "quality" and data["y"] == "f1"
    code, data, _ = run_json(
        ["stats", "--data", str(data_csv), "--x", "f1", "--y", "quality",
         "--method", "spearman"], capsys)
    assert code == 0
    assert data["method"] == "spearman"


def test_attnviz_writes_triptych(out, capsys, tmp_path):
    img = synth_raster(SyntheticSpec(seed=1), 0, 0)
    img_path = tmp_path / "img.png"
    images.save_png(img_path, img)
    attn_path = tmp_path / "img.attn"
    heads = np.random.default_rng(0).random((2, 6, 6)).astype(np.float32)
    write_attn(attn_path, AttentionTensor(data=heads, source_image_id="img1", layer="L"))
    preds = tmp_path / "preds.csv"
    write_predictions(preds, [PredictionRecord(
        image_id="img1", true_label="a", predicted_label="b",
        probabilities={"a": 0.4, "b": 0.6})], ["a", "b"])
    code, data, _ = run_json(
        ["attnviz", "--attn", str(attn_path), "--image", str(img_path),
         "--predictions", str(preds), "--alpha", "0.5"],
        capsys,
    )
    assert code == 0
    assert data["image_id"] == "img1"
    for key in ("original", "overlay", "heatmap", "metadata"):
        assert Path(data["artifacts"][key]).exists()
    meta = json.loads(Path(data["artifacts"]["metadata"]).read_text())
    assert meta["alpha"] == 0.5
    # unknown id is an input error
    code, _, err = run(
        ["attnviz", "--attn", str(attn_path), "--image", str(img_path),
         "--predictions", str(preds), "--id", "missing"],
        capsys,
    )
    assert code == 3
    assert "missing" in err


def _write_runlog(path, stop_epoch=4, seed=5):
    obj = {
        "schema": "rigorbench_runlog_v1",
        "config": {"seed": seed, "k": 2, "max_epochs": 8, "patience": 2,
                   "optimizer": {"name": "sgd", "hyperparameters": {"lr": 0.01}}},
        "results_on": "test",
        "folds": [
            {"val_scores": [0.5, 0.6, 0.55, 0.54], "stop_epoch": stop_epoch, "best_epoch": 2},
            {"val_scores": [0.5, 0.52, 0.51, 0.50], "stop_epoch": 4, "best_epoch": 2},
        ],
    }
    Path(path).write_text(json.dumps(obj))


def test_runlog_check_exit_codes(out, capsys, tmp_path):
    good = tmp_path / "good.json"
    _write_runlog(good)
    code, data, _ = run_json(["runlog-check", "--log", str(good)], capsys)
    assert code == 0 and data["finding_count"] == 0
    bad = tmp_path / "bad.json"
    _write_runlog(bad, stop_epoch=3)
    code, data, _ = run_json(["runlog-check", "--log", str(bad)], capsys)
    assert code == 1
    assert data["findings"][0]["code"] == "EARLY_STOP_MISMATCH"


def _methodology(study_id="s", before_split=False):
    return {
        "schema": "rigorbench_methodology_v1",
        "study_id": study_id,
        "datasets": ["d1"],
        "wrangling": "dedup",
        "augmentation": {"applied": True,
                         "timing": "before_split" if before_split else "after_split"},
        "validation_data": True,
        "cross_validation": {"used": True, "k": 5},
        "xai": {"used": True, "method": "saliency"},
        "results_on": "test",
        "metrics_reported": ["accuracy", "f1", "precision", "recall"],
        "best_model": "cnn",
    }


def test_lint_exit_codes_and_comparison(out, capsys, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps(_methodology("good")))
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_methodology("bad", before_split=True)))

    code, data, _ = run_json(["lint", str(good)], capsys)
    assert code == 0 and data["finding_count"] == 0

    code, data, _ = run_json(["lint", str(good), str(bad)], capsys)
    assert code == 1  # R2 is an error
    assert any(f["rule_id"] == "R2" for f in data["findings"])
    assert Path(data["artifacts"]["comparison_table"]).exists()
    assert Path(data["artifacts"]["comparison_csv"]).exists()

    # info findings only fail under --strict
    info_only = tmp_path / "info.json"
    manifest = _methodology("info")
    manifest["xai"] = {"used": False}
    info_only.write_text(json.dumps(manifest))
    code, _, _ = run_json(["lint", str(info_only)], capsys)
    assert code == 0
    code, _, _ = run_json(["lint", str(info_only), "--strict"], capsys)
    assert code == 1


def test_simulate_small(out, capsys):
    code, data, _ = run_json(
        ["simulate", "--per-class", "8", "--n-seeds", "1", "--seed", "3"], capsys
    )
    assert code == 0
    assert data["mean_flawed_leak_rate"] > 0.9
    assert data["mean_sound_leak_rate"] < 0.1
    assert Path(data["artifacts"]["summary"]).exists()


def test_report_document(out, capsys, tmp_path):
    labels = ["a", "b"]
    fold_paths = []
    for i in range(2):
        rs = [PredictionRecord(image_id=f"x{j}", true_label=labels[j % 2],
              predicted_label=labels[j % 2] if j >= i else labels[(j + 1) % 2],
              probabilities={"a": 1.0, "b": 0.0}) for j in range(8)]
        p = tmp_path / f"fold{i}.json"
        evaluate(rs, labels).write_json(p)
        fold_paths.append(str(p))
    code, data, _ = run_json(["report", "--folds"] + fold_paths, capsys)
    assert code == 0
    assert "Cross-validation (2 folds)" in data["document"]
    report_path = Path(data["artifacts"]["report"])
    assert report_path.exists()
    assert report_path.read_text() == data["document"]


def test_runs_list_and_show(corpus, out, capsys):
    run_json(["audit", str(corpus)], capsys)
    code, data, _ = run_json(["runs"], capsys)
    assert code == 0
    assert len(data["runs"]) == 1
    rid = data["runs"][0]["run_id"]
    code, shown, _ = run_json(["runs", "--id", rid], capsys)
    assert code == 0
    assert shown["run"]["command"] == "audit"
    code, _, err = run(["runs", "--id", "zzz"], capsys)
    assert code == 3


def test_no_record_skips_run_store(corpus, out, capsys):
    code, data, _ = run_json(["audit", str(corpus), "--no-record"], capsys)
    assert code == 0
    assert "run_id" not in data
    assert not (out / "runs.jsonl").exists()


def test_config_file_precedence(corpus, out, capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 42, "near_threshold": 2}))
    code, data, _ = run_json(["audit", str(corpus), "--config", str(cfg)], capsys)
    assert code == 0
    assert data["seed"] == 42  # config beats the default
    code, data, _ = run_json(
        ["audit", str(corpus), "--config", str(cfg), "--seed", "9"], capsys
    )
    assert data["seed"] == 9  # flag beats config
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text("[1, 2]")
    code, _, err = run(["audit", str(corpus), "--config", str(bad_cfg)], capsys)
    assert code == 3


def test_out_flag_beats_environment(corpus, out, capsys, tmp_path):
    explicit = tmp_path / "explicit"
    code, data, _ = run_json(["audit", str(corpus), "--out", str(explicit)], capsys)
    assert code == 0
    assert Path(data["artifacts"]["manifest"]).parent == explicit


def test_usage_and_io_exit_codes(out, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus-command"])
    assert exc.value.code == 2
    capsys.readouterr()
    code, _, err = run(["metrics", "--predictions", "/nonexistent/preds.csv"], capsys)
    assert code == 3
    assert "error:" in err
    assert main([]) == 2
    capsys.readouterr()


def test_render_text_nested():
    data = {"a": 1, "b": {"c": [1, 2]}, "d": "line1\nline2", "e": []}
    text = "\n".join(render_text(data))
    assert "a: 1" in text
    assert "  c:" in text
    assert "    - 1" in text
    assert "  line2" in text
    assert "e: []" in text


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "rigorbench" in capsys.readouterr().out
