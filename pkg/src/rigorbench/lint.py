"""Methodology linting for study descriptions.

A methodology manifest is a structured summary of how a study was run:
datasets, cleaning, augmentation timing, validation data, cross-validation,
explainability, and which metrics were reported. The linter applies a fixed
rule set to surface the recurring rigor problems in image-classification
literature, most critically augmentation applied before the holdout split,
which lets transformed copies of one image land on both sides of the
evaluation boundary.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError

METHODOLOGY_SCHEMA = "rigorbench_methodology_v1"

KNOWN_METRICS = ("accuracy", "f1", "precision", "recall", "specificity", "auc")

AUGMENTATION_TIMINGS = ("before_split", "after_split", "unspecified", "none")

SEVERITIES = ("error", "warning", "info")


@dataclass(frozen=True)
class MethodologyManifest:
    """Structured description of one study's evaluation methodology."""

    study_id: str
    datasets: tuple[str, ...]
    wrangling: str
    augmentation_applied: bool
    augmentation_timing: str
    validation_data: bool
    cross_validation_used: bool
    cross_validation_k: int | None
    xai_used: bool
    xai_method: str
    results_on: str
    metrics_reported: tuple[str, ...]
    best_model: str = ""

    def to_json_obj(self) -> dict:
        return {
            "schema": METHODOLOGY_SCHEMA,
            "study_id": self.study_id,
            "datasets": list(self.datasets),
            "wrangling": self.wrangling,
            "augmentation": {
                "applied": self.augmentation_applied,
                "timing": self.augmentation_timing,
            },
            "validation_data": self.validation_data,
            "cross_validation": {
                "used": self.cross_validation_used,
                "k": self.cross_validation_k,
            },
            "xai": {"used": self.xai_used, "method": self.xai_method},
            "results_on": self.results_on,
            "metrics_reported": list(self.metrics_reported),
            "best_model": self.best_model,
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def methodology_from_json_obj(obj) -> MethodologyManifest:
    if not isinstance(obj, dict) or obj.get("schema") != METHODOLOGY_SCHEMA:
        raise SchemaError(f"must declare schema {METHODOLOGY_SCHEMA}", "schema")

    def need(key, parent=None, path=""):
        src = parent if parent is not None else obj
        if key not in src:
            raise SchemaError("missing required field", path or key)
        return src[key]

    aug = need("augmentation")
    if not isinstance(aug, dict):
        raise SchemaError("must be an object", "augmentation")
    cv = need("cross_validation")
    if not isinstance(cv, dict):
        raise SchemaError("must be an object", "cross_validation")
    xai = need("xai")
    if not isinstance(xai, dict):
        raise SchemaError("must be an object", "xai")

    timing = need("timing", aug, "augmentation.timing")
    if timing not in AUGMENTATION_TIMINGS:
        raise SchemaError(
            f"must be one of {AUGMENTATION_TIMINGS}, got {timing!r}", "augmentation.timing"
        )
    applied = need("applied", aug, "augmentation.applied")
    if not isinstance(applied, bool):
        raise SchemaError("must be a boolean", "augmentation.applied")
    if not applied and timing != "none":
        raise SchemaError(
            "timing must be 'none' when augmentation is not applied", "augmentation.timing"
        )
    if applied and timing == "none":
        raise SchemaError(
            "applied augmentation needs a timing other than 'none'", "augmentation.timing"
        )

    metrics = need("metrics_reported")
    if not isinstance(metrics, list):
        raise SchemaError("must be a list", "metrics_reported")
    for m in metrics:
        if m not in KNOWN_METRICS:
            raise SchemaError(f"unknown metric {m!r}", "metrics_reported")

    results_on = need("results_on")
    if results_on not in ("test", "val", "unspecified"):
        raise SchemaError("must be 'test', 'val', or 'unspecified'", "results_on")

    k = cv.get("k")
    if k is not None and (not isinstance(k, int) or isinstance(k, bool)):
        raise SchemaError("must be an integer or null", "cross_validation.k")

    for key, path in ((need("validation_data"), "validation_data"),
                      (need("used", cv, "cross_validation.used"), "cross_validation.used"),
                      (need("used", xai, "xai.used"), "xai.used")):
        if not isinstance(key, bool):
            raise SchemaError("must be a boolean", path)

    datasets = need("datasets")
    if not isinstance(datasets, list) or not datasets:
        raise SchemaError("must be a non-empty list", "datasets")

    return MethodologyManifest(
        study_id=str(need("study_id")),
        datasets=tuple(str(d) for d in datasets),
        wrangling=str(obj.get("wrangling", "")),
        augmentation_applied=applied,
        augmentation_timing=timing,
        validation_data=obj["validation_data"],
        cross_validation_used=cv["used"],
        cross_validation_k=k,
        xai_used=xai["used"],
        xai_method=str(xai.get("method") or ""),
        results_on=results_on,
        metrics_reported=tuple(str(m) for m in metrics),
        best_model=str(obj.get("best_model") or ""),
    )


def read_methodology(path: str | Path) -> MethodologyManifest:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}", str(path)) from exc
    return methodology_from_json_obj(obj)


@dataclass(frozen=True)
class LintFinding:
    rule_id: str
    severity: str
    study_id: str
    summary: str
    rationale: str

    def to_json_obj(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity,
            "study_id": self.study_id,
            "summary": self.summary,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class LintRule:
    rule_id: str
    default_severity: str
    min_severity: str | None
    summary: str
    rationale: str
    applies: "callable"


def _r1(m: MethodologyManifest) -> bool:
    return not m.validation_data


def _r2(m: MethodologyManifest) -> bool:
    return m.augmentation_applied and m.augmentation_timing == "before_split"


def _r3(m: MethodologyManifest) -> bool:
    return tuple(m.metrics_reported) == ("accuracy",)


def _r4(m: MethodologyManifest) -> bool:
    return not m.cross_validation_used


def _r5(m: MethodologyManifest) -> bool:
    return m.augmentation_applied and m.augmentation_timing == "unspecified"


def _r6(m: MethodologyManifest) -> bool:
    return not m.xai_used


RULES: dict[str, LintRule] = {
    rule.rule_id: rule
    for rule in (
        LintRule(
            "R1", "warning", None,
            "no validation data",
            "without a validation partition, hyperparameters and stopping "
            "points end up tuned on the test data",
            _r1,
        ),
        LintRule(
            "R2", "error", "warning",
            "augmentation applied before the split",
            "augmenting first puts transformed copies of one image in both "
            "training and evaluation partitions, inflating every reported "
            "metric through leakage",
            _r2,
        ),
        LintRule(
            "R3", "warning", None,
            "accuracy is the only reported metric",
            "accuracy hides per-class failure under class imbalance; report "
            "per-class precision, recall, and F1 as well",
            _r3,
        ),
        LintRule(
            "R4", "info", None,
            "no cross-validation",
            "a single split gives one draw of the performance distribution "
            "with no variance estimate",
            _r4,
        ),
        LintRule(
            "R5", "warning", None,
            "augmentation timing unspecified",
            "when the order of augmentation and splitting is not stated, "
            "leakage cannot be ruled out and results cannot be reproduced",
            _r5,
        ),
        LintRule(
            "R6", "info", None,
            "no explainability analysis",
            "without inspecting what the model attends to, spurious cues "
            "like rulers or markers pass unnoticed",
            _r6,
        ),
    )
}

_SEVERITY_RANK = {name: i for i, name in enumerate(SEVERITIES)}  # error lowest rank


def lint(
    manifest: MethodologyManifest,
    severity_overrides: dict[str, str] | None = None,
) -> list[LintFinding]:
    """Apply the rule set to one manifest; findings come out in rule order.

    severity_overrides remaps rule severities, except that any rule with a
    severity floor (the pre-split augmentation rule) can never be demoted
    below it.
    """
    overrides = severity_overrides or {}
    for rule_id, severity in overrides.items():
        if rule_id not in RULES:
            raise SchemaError(f"unknown rule {rule_id!r}", "severity_overrides")
        if severity not in SEVERITIES:
            raise SchemaError(f"unknown severity {severity!r}", "severity_overrides")
    findings = []
    for rule_id in sorted(RULES):
        rule = RULES[rule_id]
        if not rule.applies(manifest):
            continue
        severity = overrides.get(rule_id, rule.default_severity)
        if rule.min_severity is not None:
            if _SEVERITY_RANK[severity] > _SEVERITY_RANK[rule.min_severity]:
                severity = rule.min_severity
        findings.append(
            LintFinding(
                rule_id=rule.rule_id,
                severity=severity,
                study_id=manifest.study_id,
                summary=rule.summary,
                rationale=rule.rationale,
            )
        )
    return findings


def lint_many(
    manifests: list[MethodologyManifest],
    severity_overrides: dict[str, str] | None = None,
) -> list[LintFinding]:
    findings = []
    for manifest in manifests:
        findings.extend(lint(manifest, severity_overrides))
    return findings


_COMPARISON_COLUMNS = (
    "study", "datasets", "wrangling", "augmentation", "validation_data",
    "cross_validation", "xai", "results_on", "metrics", "best_model",
)


def _comparison_rows(manifests: list[MethodologyManifest]) -> list[list[str]]:
    rows = []
    for m in manifests:
        if not m.augmentation_applied:
            aug = "no"
        elif m.augmentation_timing == "before_split":
            aug = "yes (before split)"
        elif m.augmentation_timing == "after_split":
            aug = "yes (after split)"
        else:
            aug = "yes (timing unspecified)"
        cv = (
            f"{m.cross_validation_k}-fold" if m.cross_validation_used and m.cross_validation_k
            else ("yes" if m.cross_validation_used else "no")
        )
        rows.append(
            [
                m.study_id,
                "; ".join(m.datasets),
                m.wrangling or "N/A",
                aug,
                "yes" if m.validation_data else "no",
                cv,
                (m.xai_method or "yes") if m.xai_used else "no",
                m.results_on,
                ", ".join(m.metrics_reported) or "N/A",
                m.best_model or "N/A",
            ]
        )
    return rows


def render_comparison(manifests: list[MethodologyManifest]) -> tuple[str, str]:
    """Side-by-side study table as (aligned text, CSV)."""
    rows = _comparison_rows(manifests)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_COMPARISON_COLUMNS)
    writer.writerows(rows)
    csv_text = buf.getvalue()

    all_rows = [list(_COMPARISON_COLUMNS)] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in all_rows) for i in range(len(_COMPARISON_COLUMNS))]
    lines = []
    for i, row in enumerate(all_rows):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n", csv_text
