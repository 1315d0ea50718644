"""Command line entry point.

Every subcommand resolves its options with the same precedence: explicit
flags beat the --config file, which beats built-in defaults. The output
directory falls back to the RIGORBENCH_OUT environment variable, then the
working directory. Each command builds one result dictionary and renders it
either as JSON (--json) or as indented text; the effective seed is always
part of it. Commands that write artifacts also append a record to
runs.jsonl in the output directory unless --no-record is given.

Exit codes: 0 success, 1 the command completed but found problems
(leaks, lint errors, protocol findings, failed verification), 2 usage
errors, 3 unreadable or malformed inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, attention, audit, images, leakage, lint, metrics
from . import protocol as protocol_mod
from . import report as report_mod
from . import runstore, simulate, splits, stats
from .augment import augment_training_set, read_plan
from .errors import MissingArtifact, RigorbenchError, SchemaError, UnknownId
from .kernels import BACKEND
from .manifest import read_manifest

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_IO = 3


class Outcome:
    """What a handler produced: the result dict, exit code, artifact paths."""

    def __init__(self, data: dict, exit_code: int = EXIT_OK, artifacts: dict | None = None):
        self.data = data
        self.exit_code = exit_code
        self.artifacts = artifacts or {}


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"config file {path} must hold a JSON object")
    return obj


def resolve(args: argparse.Namespace, config: dict, key: str, default):
    """Option precedence: command line flag, then config entry, then default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def seed_of(args, config) -> int:
    return int(resolve(args, config, "seed", 0))


def out_dir_of(args, config) -> Path:
    value = resolve(args, config, "out", None)
    if value is None:
        value = os.environ.get("RIGORBENCH_OUT") or "."
    path = Path(value)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _scalar(v) -> str:
    if isinstance(v, str):
        return v
    return json.dumps(v)


def render_text(obj, indent: int = 0) -> list[str]:
    """Generic dict-to-text rendering so text and JSON share one source."""
    pad = "  " * indent
    lines: list[str] = []
    if isinstance(obj, dict):
        for key, value in obj.items():
            if isinstance(value, str) and "\n" in value:
                lines.append(f"{pad}{key}:")
                lines += [f"{pad}  {ln}" for ln in value.splitlines()]
            elif isinstance(value, (dict, list)) and value:
                lines.append(f"{pad}{key}:")
                lines += render_text(value, indent + 1)
            else:
                lines.append(f"{pad}{key}: {_scalar(value)}")
    elif isinstance(obj, list):
        for item in obj:
            if isinstance(item, (dict, list)):
                lines.append(f"{pad}-")
                lines += render_text(item, indent + 1)
            else:
                lines.append(f"{pad}- {_scalar(item)}")
    else:
        lines.append(f"{pad}{_scalar(obj)}")
    return lines


# ---------------------------------------------------------------- handlers


def cmd_audit(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    labels = resolve(args, config, "labels", "dir")
    near = int(resolve(args, config, "near_threshold", audit.DEFAULT_NEAR_THRESHOLD))
    workers = int(resolve(args, config, "workers", 8))
    manifest, undecodable = audit.hash_corpus(args.corpus, labels=labels, workers=workers)
    groups = audit.find_duplicates(manifest.records, near_threshold=near)
    ledger = audit.duplicates_to_ledger(groups)
    cleaned, cleaning = audit.apply_exclusions(manifest, ledger)

    raw_path = out / "manifest.csv"
    ledger_path = out / "exclusions.json"
    report_path = out / "cleaning_report.json"
    cleaned_path = out / "cleaned.csv"
    manifest.write_csv(raw_path)
    ledger.write_json(ledger_path)
    cleaning.write_json(report_path)
    cleaned.write_csv(cleaned_path)

    data = {
        "command": "audit",
        "seed": seed,
        "backend": BACKEND,
        "images": len(manifest.records),
        "undecodable": sorted(undecodable),
        "duplicate_groups": [
            {"kind": g.kind, "members": list(g.member_ids), "max_hamming": g.max_hamming}
            for g in groups
        ],
        "excluded": len(cleaning.excluded),
        "kept": len(cleaned.records),
        "stamp": cleaned.stamp,
        "class_counts": cleaned.class_counts(),
        "artifacts": {
            "manifest": str(raw_path),
            "exclusions": str(ledger_path),
            "cleaning_report": str(report_path),
            "cleaned_manifest": str(cleaned_path),
        },
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


def cmd_split(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    train = float(resolve(args, config, "train", 0.7))
    val = float(resolve(args, config, "val", 0.15))
    test = float(resolve(args, config, "test", 0.15))
    manifest = read_manifest(args.manifest)
    split = splits.stratified_holdout(manifest, splits.SplitSpec(train, val, test, seed))
    verification = splits.verify_split(manifest, split)
    split_path = out / "split.json"
    split.write_json(split_path)
    data = {
        "command": "split",
        "seed": seed,
        "proportions": {"train": train, "val": val, "test": test},
        "sizes": {part: len(split.part(part)) for part in ("train", "val", "test")},
        "verification": verification.to_json_obj(),
        "artifacts": {"split": str(split_path)},
    }
    code = EXIT_OK if verification.passed else EXIT_FINDINGS
    return Outcome(data, code, data["artifacts"])


def cmd_kfold(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    k = int(resolve(args, config, "k", 5))
    manifest = read_manifest(args.manifest)
    pool_note = "all records"
    records = manifest.records
    if args.split:
        split = splits.read_split(args.split)
        test_ids = set(split.part("test"))
        records = tuple(r for r in records if r.id not in test_ids)
        pool_note = "records outside the test partition"
    plan = splits.stratified_kfold([(r.id, r.label) for r in records], k=k, seed=seed)
    folds_path = out / "folds.json"
    plan.write_json(folds_path)
    data = {
        "command": "kfold",
        "seed": seed,
        "k": k,
        "pool": pool_note,
        "pool_size": len(records),
        "fold_sizes": plan.fold_sizes(),
        "artifacts": {"folds": str(folds_path)},
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


def cmd_leak_scan(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    near = int(resolve(args, config, "near_threshold", leakage.DEFAULT_NEAR_THRESHOLD))
    manifest = read_manifest(args.manifest)
    split = splits.read_split(args.split)
    findings = leakage.cross_split_scan(manifest, split, near_threshold=near)
    if not args.no_transforms:
        findings += leakage.transform_invariant_scan(manifest, split, near_threshold=near)
    summary = leakage.leakage_rate(findings, split)
    findings_path = out / "leak_findings.json"
    payload = {
        "summary": summary.to_json_obj(),
        "findings": [f.to_json_obj() for f in findings],
    }
    findings_path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    data = {
        "command": "leak-scan",
        "seed": seed,
        "near_threshold": near,
        "transforms_scanned": not args.no_transforms,
        **payload,
        "artifacts": {"findings": str(findings_path)},
    }
    code = EXIT_FINDINGS if findings else EXIT_OK
    return Outcome(data, code, data["artifacts"])


def cmd_augment(args, config) -> Outcome:
    out = out_dir_of(args, config)
    manifest = read_manifest(args.manifest)
    split = splits.read_split(args.split)
    plan = read_plan(args.plan)
    result = augment_training_set(manifest, split, plan, out / "augmented")
    manifest_path = out / "augmented_manifest.csv"
    split_path = out / "augmented_split.json"
    prov_path = out / "provenance.json"
    result.manifest.write_csv(manifest_path)
    result.split.write_json(split_path)
    prov_path.write_text(
        json.dumps(result.provenance, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    added = len(result.manifest.records) - len(manifest.records)
    data = {
        "command": "augment",
        # the plan's seed governs every parameter draw, so it is the
        # effective seed whatever --seed said
        "seed": plan.seed,
        "copies_per_image": plan.copies_per_image,
        "train_sources": len(split.part("train")),
        "copies_written": added,
        "artifacts": {
            "augmented_manifest": str(manifest_path),
            "augmented_split": str(split_path),
            "provenance": str(prov_path),
        },
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


def cmd_metrics(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    records, labels = metrics.read_predictions(args.predictions)
    report = metrics.evaluate(records, labels)
    report_path = out / "metric_report.json"
    report.write_json(report_path)
    data = {
        "command": "metrics",
        "seed": seed,
        "n_predictions": report.total,
        "accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f1": report.macro_f1,
        "zero_division_flags": list(report.zero_division_flags),
        "confusion": report.confusion.to_text_table(),
        "artifacts": {"report": str(report_path)},
    }
    replicates = resolve(args, config, "bootstrap", None)
    if replicates is not None:
        metric = resolve(args, config, "metric", "macro_f1")
        low, high = metrics.bootstrap_ci(
            records, labels, metric=metric, replicates=int(replicates), seed=seed
        )
        data["bootstrap"] = {
            "metric": metric,
            "replicates": int(replicates),
            "ci95": [low, high],
        }
    return Outcome(data, EXIT_OK, data["artifacts"])


def _read_pairs(path: str, x_col: str | None, y_col: str | None):
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    names = list(rows[0].keys())
    if len(names) < 2:
        raise SchemaError(f"{path}: need at least two columns, got {names}")
    x_col = x_col or names[0]
    y_col = y_col or names[1]
    for col in (x_col, y_col):
        if col not in names:
            raise SchemaError(f"{path}: no column named {col!r}")
    try:
        xs = [float(r[x_col]) for r in rows]
        ys = [float(r[y_col]) for r in rows]
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: non-numeric value: {exc}") from exc
    return xs, ys, x_col, y_col


def cmd_stats(args, config) -> Outcome:
    seed = seed_of(args, config)
    method = resolve(args, config, "method", "pearson")
    xs, ys, x_col, y_col = _read_pairs(args.data, args.x, args.y)
    result = stats.correlate(xs, ys, method=method)
    data = {
        "command": "stats",
        "seed": seed,
        "x": x_col,
        "y": y_col,
        "n": result.n,
        "method": result.method,
        "coefficient": result.coefficient,
        "p_value": result.p_value,
    }
    return Outcome(data, EXIT_OK)


def cmd_attnviz(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    alpha = float(resolve(args, config, "alpha", 0.6))
    tensor = attention.read_attn(args.attn)
    image = images.load_rgb(args.image)
    records, _labels = metrics.read_predictions(args.predictions)
    wanted = args.id or tensor.source_image_id
    matches = [r for r in records if r.image_id == wanted]
    if not matches:
        raise UnknownId(f"no prediction for image id {wanted!r} in {args.predictions}")
    paths = attention.render_triptych(image, tensor, matches[0], out, alpha=alpha)
    data = {
        "command": "attnviz",
        "seed": seed,
        "image_id": wanted,
        "layer": tensor.layer,
        "alpha": alpha,
        "artifacts": {
            "original": str(paths.original),
            "overlay": str(paths.overlay),
            "heatmap": str(paths.heatmap),
            "metadata": str(paths.metadata),
        },
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


def cmd_runlog_check(args, config) -> Outcome:
    seed = seed_of(args, config)
    log = protocol_mod.read_runlog(args.log)
    findings = protocol_mod.validate_runlog(log)
    data = {
        "command": "runlog-check",
        "seed": seed,
        "declared_seed": log.seed,
        "k": log.k,
        "folds": len(log.folds),
        "findings": [f.to_json_obj() for f in findings],
        "finding_count": len(findings),
    }
    return Outcome(data, EXIT_FINDINGS if findings else EXIT_OK)


def cmd_lint(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    manifests = [lint.read_methodology(p) for p in args.methodology]
    findings = lint.lint_many(manifests)
    data = {
        "command": "lint",
        "seed": seed,
        "studies": [m.study_id for m in manifests],
        "findings": [f.to_json_obj() for f in findings],
        "finding_count": len(findings),
    }
    artifacts = {}
    if len(manifests) > 1:
        table, csv_text = lint.render_comparison(manifests)
        table_path = out / "comparison.txt"
        csv_path = out / "comparison.csv"
        table_path.write_text(table, encoding="utf-8")
        csv_path.write_text(csv_text, encoding="utf-8")
        artifacts = {"comparison_table": str(table_path), "comparison_csv": str(csv_path)}
        data["artifacts"] = artifacts
        data["comparison"] = table
    errors = [f for f in findings if f.severity == "error"]
    fail = bool(errors) or (args.strict and bool(findings))
    return Outcome(data, EXIT_FINDINGS if fail else EXIT_OK, artifacts)


def cmd_simulate(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    spec = simulate.SyntheticSpec(
        n_classes=int(resolve(args, config, "classes", 4)),
        per_class=int(resolve(args, config, "per_class", 50)),
        image_size=int(resolve(args, config, "image_size", 48)),
        noise=int(resolve(args, config, "noise", 12)),
        seed=seed,
    )
    n_seeds = int(resolve(args, config, "n_seeds", 20))
    summary = simulate.compare_protocols(spec, n_seeds=n_seeds)
    summary_path = out / "simulation.json"
    obj = summary.to_json_obj()
    summary_path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    data = {
        "command": "simulate",
        "seed": seed,
        **{k: v for k, v in obj.items() if k != "runs"},
        "artifacts": {"summary": str(summary_path)},
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


def cmd_runs(args, config) -> Outcome:
    seed = seed_of(args, config)
    store = args.store or str(out_dir_of(args, config) / "runs.jsonl")
    contents = runstore.read_runs(store)
    if args.id:
        wanted = [r for r in contents.records if r.run_id == args.id]
        if not wanted:
            raise MissingArtifact(f"no run {args.id!r} in {store}")
        data = {
            "command": "runs",
            "seed": seed,
            "run": wanted[0].to_json_obj(),
        }
        return Outcome(data, EXIT_OK)
    data = {
        "command": "runs",
        "seed": seed,
        "store": str(store),
        "runs": [
            {"run_id": r.run_id, "timestamp": r.timestamp, "command": r.command}
            for r in contents.records
        ],
        "quarantined": [
            {"line": q.line_number, "reason": q.reason} for q in contents.quarantined
        ],
    }
    return Outcome(data, EXIT_OK)


def cmd_report(args, config) -> Outcome:
    out = out_dir_of(args, config)
    seed = seed_of(args, config)
    folds = report_mod.load_fold_reports(args.folds)
    test_report = metrics.read_report(args.test) if args.test else None
    protocol_findings = None
    if args.runlog:
        protocol_findings = protocol_mod.validate_runlog(protocol_mod.read_runlog(args.runlog))
    lint_findings = None
    if args.methodology:
        lint_findings = lint.lint_many([lint.read_methodology(p) for p in args.methodology])
    correlations = None
    if args.stats_data:
        method = resolve(args, config, "method", "pearson")
        xs, ys, x_col, y_col = _read_pairs(args.stats_data, args.x, args.y)
        correlations = {f"{x_col}_vs_{y_col}": stats.correlate(xs, ys, method=method)}
    document = report_mod.render_study_report(
        folds,
        test_report=test_report,
        protocol_findings=protocol_findings,
        lint_findings=lint_findings,
        correlations=correlations,
    )
    report_path = out / "report.txt"
    report_path.write_text(document, encoding="utf-8")
    data = {
        "command": "report",
        "seed": seed,
        "folds": len(folds),
        "document": document,
        "artifacts": {"report": str(report_path)},
    }
    return Outcome(data, EXIT_OK, data["artifacts"])


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--json", action="store_true", help="print the result as JSON")
    common.add_argument("--out", help="output directory (default: $RIGORBENCH_OUT or .)")
    common.add_argument("--seed", type=int, help="seed echoed and used where relevant")
    common.add_argument(
        "--no-record", action="store_true", help="do not append this run to runs.jsonl"
    )

    parser = argparse.ArgumentParser(
        prog="rigorbench",
        description="Dataset hygiene and evaluation rigor checks for image studies.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("audit", parents=[common], help="hash a corpus, find duplicates, clean")
    p.add_argument("corpus", help="directory of images, one subdirectory per class")
    p.add_argument("--labels", help='"dir" or "fixed:<label>"')
    p.add_argument("--near-threshold", type=int, dest="near_threshold")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("split", parents=[common], help="stratified train/val/test holdout")
    p.add_argument("--manifest", required=True, help="cleaned manifest CSV")
    p.add_argument("--train", type=float)
    p.add_argument("--val", type=float)
    p.add_argument("--test", type=float)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("kfold", parents=[common], help="stratified cross-validation folds")
    p.add_argument("--manifest", required=True, help="cleaned manifest CSV")
    p.add_argument("--split", help="holdout split JSON; folds cover everything but test")
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_kfold)

    p = sub.add_parser("leak-scan", parents=[common], help="find train-to-eval leakage")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--near-threshold", type=int, dest="near_threshold")
    p.add_argument(
        "--no-transforms",
        action="store_true",
        help="skip the flipped/rotated duplicate scan",
    )
    p.set_defaults(func=cmd_leak_scan)

    p = sub.add_parser("augment", parents=[common], help="augment the train partition only")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--plan", required=True, help="augmentation plan JSON")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("metrics", parents=[common], help="score a predictions CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--bootstrap", type=int, help="bootstrap replicates for a 95%% CI")
    p.add_argument("--metric", help="metric for the bootstrap CI (default macro_f1)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("stats", parents=[common], help="correlate two numeric columns")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--x", help="x column name (default: first column)")
    p.add_argument("--y", help="y column name (default: second column)")
    p.add_argument(
        "--method", choices=["pearson", "spearman", "spearman_exact"], default=None
    )
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("attnviz", parents=[common], help="render attention triptych panels")
    p.add_argument("--attn", required=True, help="attention tensor file")
    p.add_argument("--image", required=True, help="the original image")
    p.add_argument("--predictions", required=True, help="predictions CSV for labels")
    p.add_argument("--id", help="image id (default: the tensor's own)")
    p.add_argument("--alpha", type=float, help="overlay opacity (default 0.6)")
    p.set_defaults(func=cmd_attnviz)

    p = sub.add_parser("runlog-check", parents=[common], help="audit a training run log")
    p.add_argument("--log", required=True, help="run log JSON")
    p.set_defaults(func=cmd_runlog_check)

    p = sub.add_parser("lint", parents=[common], help="lint methodology manifests")
    p.add_argument("methodology", nargs="+", help="methodology manifest JSON files")
    p.add_argument(
        "--strict", action="store_true", help="exit 1 on warnings, not only errors"
    )
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser(
        "simulate", parents=[common], help="demonstrate the augment-then-split pitfall"
    )
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", type=int, dest="per_class")
    p.add_argument("--image-size", type=int, dest="image_size")
    p.add_argument("--noise", type=int)
    p.add_argument("--n-seeds", type=int, dest="n_seeds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("runs", parents=[common], help="list or show recorded runs")
    p.add_argument("--store", help="runs.jsonl path (default: <out>/runs.jsonl)")
    p.add_argument("--id", help="show one run in full")
    p.set_defaults(func=cmd_runs)

    p = sub.add_parser("report", parents=[common], help="assemble the study report")
    p.add_argument("--folds", nargs="+", required=True, help="fold metric report JSONs")
    p.add_argument("--test", help="held-out test metric report JSON")
    p.add_argument("--runlog", help="run log JSON for the protocol audit section")
    p.add_argument(
        "--methodology", nargs="*", default=[], help="methodology JSONs for the lint section"
    )
    p.add_argument("--stats-data", dest="stats_data", help="CSV for the correlation section")
    p.add_argument("--x", help="x column for --stats-data")
    p.add_argument("--y", help="y column for --stats-data")
    p.add_argument("--method", choices=["pearson", "spearman", "spearman_exact"], default=None)
    p.set_defaults(func=cmd_report)

    return parser


def _record_run(args, config: dict, outcome: Outcome) -> None:
    if not outcome.artifacts or args.no_record:
        return
    run_config = {"argv": sys.argv[1:], "seed": outcome.data.get("seed")}
    record = runstore.new_run_record(
        command=outcome.data.get("command", args.command),
        config=run_config,
        artifacts=outcome.artifacts,
    )
    runstore.append_run(out_dir_of(args, config) / "runs.jsonl", record)
    outcome.data["run_id"] = record.run_id


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        config = load_config(args.config)
        outcome = args.func(args, config)
        _record_run(args, config, outcome)
    except (RigorbenchError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.json:
        print(json.dumps(outcome.data, sort_keys=True, indent=2))
    else:
        print("\n".join(render_text(outcome.data)))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
